//! Random programs around a faulting access inside a transaction.

use eflags_channel::isa::{assemble, ArchState, MemorySpace, Privilege, Program};
use rand::seq::SliceRandom;
use rand::Rng;

pub const KERNEL: u64 = 0xffff_8000_0000_0000;
pub const USER: u64 = 0x1000;

/// Registers the generated code may write; r14 holds the kernel address,
/// r15 the user one.
const REGS: [&str; 8] = ["rax", "rbx", "rdx", "rsi", "rdi", "r8", "r9", "r10"];

pub struct Case {
    /// `setup; XBEGIN abort; body; XEND; abort: [tail]`
    pub program: Program,
    /// Just `setup`.
    pub setup: Program,
    pub state: ArchState,
}

fn reg<R: Rng>(rng: &mut R) -> &'static str {
    REGS.choose(rng).unwrap()
}

/// A register other than rax.
fn reg_no_ah<R: Rng>(rng: &mut R) -> &'static str {
    REGS[1..].choose(rng).unwrap()
}

fn imm<R: Rng>(rng: &mut R) -> u64 {
    match rng.gen_range(0..3) {
        0 => rng.gen_range(0..4),
        1 => rng.gen_range(0..256),
        _ => rng.gen(),
    }
}

fn user_mem<R: Rng>(rng: &mut R) -> String {
    format!("[r15 + {}]", rng.gen_range(0..64))
}

/// One non-faulting instruction. `depth` tracks PUSHF entries so POPF never
/// underflows. With `ah_dead`, nothing touches rax or reads AH.
fn plain<R: Rng>(rng: &mut R, depth: &mut usize, ah_dead: bool) -> String {
    let reg = if ah_dead { reg_no_ah } else { reg };
    match rng.gen_range(0..13) {
        7 | 9 if ah_dead => "NOP".into(),
        0 => format!("MOV {}, {}", reg(rng), imm(rng)),
        1 => format!("MOV {}, {}", reg(rng), reg(rng)),
        2 => format!("MOV {}, {}", reg(rng), user_mem(rng)),
        3 => format!("SUB {}, {}", reg(rng), imm(rng)),
        4 => format!("SUB {}, {}", reg(rng), reg(rng)),
        5 => format!("SUB {}, {}", user_mem(rng), rng.gen_range(0..256)),
        6 => format!("CMP {}, {}", reg(rng), reg(rng)),
        7 => format!("CMPXCHG {}, {}", user_mem(rng), reg(rng)),
        8 => "LAHF".into(),
        9 => "SAHF".into(),
        10 => {
            *depth += 1;
            "PUSHF".into()
        }
        11 if *depth > 0 => {
            *depth -= 1;
            "POPF".into()
        }
        _ => "NOP".into(),
    }
}

fn fault<R: Rng>(rng: &mut R) -> String {
    let m = format!("[r14 + {}]", rng.gen_range(0..16));
    match rng.gen_range(0..4) {
        0 => format!("SUB {}, {m}", reg(rng)),
        1 => format!("MOV {}, {m}", reg(rng)),
        2 => format!("CMP {}, {m}", reg(rng)),
        _ => format!("CMPXCHG {m}, {}", reg(rng)),
    }
}

fn block<R: Rng>(rng: &mut R, max: usize, depth: &mut usize, ah_dead: bool) -> Vec<String> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| plain(rng, depth, ah_dead)).collect()
}

/// A random case. With `tail`, the fallback path ends in a JZ choosing
/// between two random blocks that leave AH dead (LAHF may clobber it).
pub fn random_case<R: Rng>(rng: &mut R, tail: bool) -> Case {
    let mut depth = 0;
    let mut setup = vec![
        format!("MOV r14, {KERNEL:#x}"),
        format!("MOV r15, {USER:#x}"),
    ];
    setup.extend(block(rng, 6, &mut depth, false));
    let mut body = block(rng, 6, &mut depth, false);
    body.push(fault(rng));
    body.extend(block(rng, 10, &mut depth, false));

    let mut lines = setup.clone();
    lines.push("XBEGIN abort".into());
    lines.extend(body);
    lines.push("XEND".into());
    lines.push("abort:".into());
    if tail {
        // The tail runs after rollback, so only the setup's PUSHFs count.
        let mut d = setup.iter().filter(|l| *l == "PUSHF").count()
            - setup.iter().filter(|l| *l == "POPF").count();
        lines.push("JZ taken".into());
        lines.extend(block(rng, 4, &mut d, true));
        lines.push("JMP done".into());
        lines.push("taken:".into());
        lines.extend(block(rng, 4, &mut d, true));
        lines.push("done:".into());
    }

    let mut user = [0u8; 64];
    rng.fill(&mut user[..]);
    let mut kernel = [0u8; 16];
    rng.fill(&mut kernel[..]);
    let mem = MemorySpace::builder()
        .with_bytes(USER, &user, Privilege::User)
        .with_bytes(KERNEL, &kernel, Privilege::Kernel)
        .build();
    Case {
        program: assemble(&lines.join("\n")).unwrap(),
        setup: assemble(&setup.join("\n")).unwrap(),
        state: ArchState::new(mem),
    }
}
