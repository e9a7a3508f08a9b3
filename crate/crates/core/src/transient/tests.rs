use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

use super::*;
use crate::isa::{assemble, ArchState, Flag, MemorySpace, Opcode, Privilege, Program, Reg};

const KERNEL: u64 = 0xffff_8000_0000_0000;
const USER: u64 = 0x1000;

fn memory(secret: u8) -> MemorySpace {
    MemorySpace::builder()
        .map(USER, 64, Privilege::User)
        .with_bytes(KERNEL, &[secret], Privilege::Kernel)
        .build()
}

/// The timed gadget with `delay` NOPs between the fallback label and JZ.
fn gadget(test_num: u8, delay: usize, jump: &str) -> Program {
    let nops = if delay > 0 {
        format!(".rept {delay} NOP .endr")
    } else {
        String::new()
    };
    assemble(&format!(
        "RDTSC r8
         MOV rcx, {KERNEL:#x}
         MOV rbx, {test_num}
         XBEGIN fallback
         SUB rbx, [rcx]
         XEND
         fallback:
         {nops}
         {jump} equal
         JMP notequal
         equal: NOP
         notequal: NOP
         RDTSC r9"
    ))
    .unwrap()
}

fn spend(result: &RunResult) -> u64 {
    result.final_state.reg(Reg::R9) - result.final_state.reg(Reg::R8)
}

/// Hand-summed latency of `gadget` under default latencies, no noise:
/// MOV 1 + MOV 1 + XBEGIN 1 + faulting SUB (alu 1 + load 4 + abort 10)
/// + delay NOPs + JZ 1 + JMP 1 + NOP 1.
fn expected_spend(delay: u64, stalled: bool) -> u64 {
    1 + 1 + 1 + (1 + 4 + 10) + delay + 1 + 1 + 1 + if stalled { 20 } else { 0 }
}

fn jz_entry(result: &RunResult) -> TraceEntry {
    *result
        .trace
        .iter()
        .find(|e| e.opcode == Opcode::Jz && !e.transient)
        .expect("JZ retired")
}

#[test]
fn abort_restores_zf() {
    let cfg = MicroConfig::noiseless();
    let r = run(&cfg, ArchState::new(memory(7)), &gadget(7, 0, "JZ")).unwrap();
    assert!(r.aborted);
    assert!(!r.final_state.flags.zf);

    // Pre-transaction ZF = 1 survives a transient body that clears it.
    let p = assemble(&format!(
        "SUB rax, rax; MOV rcx, {KERNEL:#x}; MOV rbx, 1; XBEGIN fb; SUB rbx, [rcx]; XEND; fb: JZ out; out: NOP"
    ))
    .unwrap();
    let r = run(&cfg, ArchState::new(memory(7)), &p).unwrap();
    assert!(r.aborted);
    assert!(r.final_state.flags.zf);
}

#[test]
fn plain_program_costs_sum_of_latencies() {
    let cfg = MicroConfig::noiseless();
    let p = assemble(
        "MOV rcx, 0x1000; MOV rax, [rcx]; SUB rax, 1; NOP; PUSHF; POPF; JMP end; end: NOP",
    )
    .unwrap();
    let r = run(&cfg, ArchState::new(memory(0)), &p).unwrap();
    assert!(!r.aborted);
    assert_eq!(r.cycles, 1 + 4 + 1 + 1 + 2 + 2 + 1 + 1);
}

#[test]
fn runs_are_deterministic() {
    let cfg = MicroConfig::default();
    let p = gadget(0x42, 0, "JZ");
    let a = run(&cfg, ArchState::new(memory(0x42)), &p).unwrap();
    let b = run(&cfg, ArchState::new(memory(0x42)), &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn matching_guess_installs_revert() {
    let cfg = MicroConfig::noiseless();
    let p = gadget(0x42, 0, "JZ");
    let mut state = ArchState::new(memory(0x42));
    state.set_reg(Reg::RCX, KERNEL);
    state.set_reg(Reg::RBX, 0x42);
    state.pc = 4;
    let mut rng = Pcg64Mcg::seed_from_u64(0);
    let fx = transient_execute(&cfg, &state, &p, 4, &state, &mut rng, None);
    assert_eq!(fx.changed_flag, Some(Flag::Zf));
    assert_eq!(fx.forwarded, Some(0x42));

    state.set_reg(Reg::RBX, 0x41);
    let fx = transient_execute(&cfg, &state, &p, 4, &state, &mut rng, None);
    assert_eq!(fx.changed_flag, None);
}

#[test]
fn unreadable_secret_forwards_zero() {
    let cfg = MicroConfig {
        secret_transiently_readable: 0.0,
        ..MicroConfig::noiseless()
    };
    let p = gadget(0, 0, "JZ");
    for test_num in 0..=255u8 {
        let mut state = ArchState::new(memory(0x99));
        state.set_reg(Reg::RCX, KERNEL);
        state.set_reg(Reg::RBX, u64::from(test_num));
        state.pc = 4;
        let mut rng = Pcg64Mcg::seed_from_u64(u64::from(test_num));
        let fx = transient_execute(&cfg, &state, &p, 4, &state, &mut rng, None);
        // Scalar oracle: forwarded 0, so only a zero guess subtracts to 0.
        let oracle = test_num.wrapping_sub(0) == 0;
        assert_eq!(fx.forwarded, Some(0));
        assert_eq!(fx.changed_flag.is_some(), oracle, "test_num {test_num}");
    }
}

#[test]
fn rdtsc_brackets_nops() {
    let p = assemble("RDTSC r8; RDTSC r9; .rept 5 NOP .endr; RDTSC r10").unwrap();
    let r = run(&MicroConfig::noiseless(), ArchState::default(), &p).unwrap();
    let s = &r.final_state;
    assert_eq!(s.reg(Reg::R8), s.reg(Reg::R9));
    assert_eq!(s.reg(Reg::new(9).unwrap()) - s.reg(Reg::R9), 5);
}

#[test]
fn jittered_bracket_stays_in_bound() {
    let p = assemble("RDTSC r8; .rept 5 NOP .endr; RDTSC r9").unwrap();
    for seed in 0..500 {
        let cfg = MicroConfig {
            noise: NoiseModel {
                kind: NoiseKind::Additive,
                per_sample_jitter: 3,
                outlier_prob: 0.0,
                outlier_magnitude: 0,
            },
            rng_seed: seed,
            ..MicroConfig::default()
        };
        let r = run(&cfg, ArchState::default(), &p).unwrap();
        let d = r.final_state.reg(Reg::R9) - r.final_state.reg(Reg::R8);
        assert!((5..=11).contains(&d));
    }
}

#[test]
fn stall_window_boundary_sweep() {
    for window in [6u64, 7, 8, 9] {
        let cfg = MicroConfig {
            revert_stall_window: window,
            ..MicroConfig::noiseless()
        };
        for delay in 0..=16u64 {
            let r = run(
                &cfg,
                ArchState::new(memory(0x42)),
                &gadget(0x42, delay as usize, "JZ"),
            )
            .unwrap();
            let jz = jz_entry(&r);
            let stalled = delay < window;
            assert_eq!(jz.stalled, stalled, "window {window} delay {delay}");
            assert_eq!(jz.cycle_cost, if stalled { 21 } else { 1 });
            assert_eq!(spend(&r), expected_spend(delay, stalled));
        }
    }
}

#[test]
fn mismatch_costs_the_unstalled_sum() {
    let cfg = MicroConfig::noiseless();
    let r = run(&cfg, ArchState::new(memory(0x42)), &gadget(0x41, 0, "JZ")).unwrap();
    assert!(!jz_entry(&r).stalled);
    assert_eq!(spend(&r), expected_spend(0, false));
}

#[test]
fn no_flag_change_means_no_signal() {
    let cfg = MicroConfig::noiseless();
    let with_body = assemble(&format!(
        "RDTSC r8; MOV rcx, {KERNEL:#x}; MOV rbx, 3; XBEGIN fb; MOV rdx, [rcx]; SUB rbx, rdx; CMP rbx, 0; NOP; XEND; fb: JZ e; e: NOP; RDTSC r9"
    ))
    .unwrap();
    let without_body = assemble(&format!(
        "RDTSC r8; MOV rcx, {KERNEL:#x}; MOV rbx, 3; XBEGIN fb; MOV rdx, [rcx]; XEND; fb: JZ e; e: NOP; RDTSC r9"
    ))
    .unwrap();
    let a = run(&cfg, ArchState::new(memory(0x42)), &with_body).unwrap();
    let b = run(&cfg, ArchState::new(memory(0x42)), &without_body).unwrap();
    assert_eq!(spend(&a), spend(&b));
    assert!(a
        .trace
        .iter()
        .any(|e| e.transient && e.opcode == Opcode::Sub));
}

#[test]
fn jmp_erases_penalty() {
    let cfg = MicroConfig::noiseless();
    let matched = run(&cfg, ArchState::new(memory(0x42)), &gadget(0x42, 0, "JMP")).unwrap();
    let unmatched = run(&cfg, ArchState::new(memory(0x42)), &gadget(0x41, 0, "JMP")).unwrap();
    assert!(matched.trace.iter().all(|e| !e.stalled));
    assert_eq!(spend(&matched), spend(&unmatched));
}

#[test]
fn handler_suppression_keeps_the_channel() {
    let cfg = MicroConfig {
        suppression: Suppression::Handler,
        ..MicroConfig::noiseless()
    };
    let hit = run(&cfg, ArchState::new(memory(5)), &gadget(5, 0, "JZ")).unwrap();
    let miss = run(&cfg, ArchState::new(memory(5)), &gadget(6, 0, "JZ")).unwrap();
    assert_eq!(spend(&hit) - spend(&miss), 20);
    assert_eq!(spend(&miss), expected_spend(0, false) + 150);
}

#[test]
fn hard_faults() {
    let cfg = MicroConfig::noiseless();
    let p = assemble(&format!("MOV rcx, {KERNEL:#x}; MOV rax, [rcx]")).unwrap();
    assert!(matches!(
        run(&cfg, ArchState::new(memory(0)), &p),
        Err(SimError::PrivilegedAccessUntransacted {
            pc: 1,
            addr: KERNEL
        })
    ));
    let p = assemble("spin: JMP spin").unwrap();
    let small = MicroConfig {
        max_instructions: 1000,
        ..cfg.clone()
    };
    assert!(matches!(
        run(&small, ArchState::default(), &p),
        Err(SimError::Runaway { budget: 1000 })
    ));
    let p = assemble("MOV rcx, 0x777000; MOV rax, [rcx]").unwrap();
    assert!(matches!(
        run(&cfg, ArchState::default(), &p),
        Err(SimError::Isa(_))
    ));
}

#[test]
fn trace_csv_columns() {
    let cfg = MicroConfig::noiseless();
    let r = run(&cfg, ArchState::new(memory(1)), &gadget(1, 0, "JZ")).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&r.trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("step,pc,opcode,cycle_cost,transient,stalled")
    );
    assert!(text.contains(",JZ,21,0,1\n"));
    assert!(text.contains(",SUB,15,1,0\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_accounts_for_every_cycle(seed in any::<u64>(), test in any::<u8>(), delay in 0usize..12) {
        let cfg = MicroConfig { rng_seed: seed, ..MicroConfig::default() };
        let r = run(&cfg, ArchState::new(memory(test ^ 1)), &gadget(test, delay, "JZ")).unwrap();
        let total: u64 = r.trace.iter().map(|e| e.cycle_cost + e.noise).sum();
        prop_assert_eq!(total, r.cycles);
    }

    #[test]
    fn same_seed_same_result(seed in any::<u64>(), test in any::<u8>()) {
        let cfg = MicroConfig { rng_seed: seed, ..MicroConfig::default() };
        let p = gadget(test, 0, "JZ");
        let a = run(&cfg, ArchState::new(memory(test)), &p).unwrap();
        let b = run(&cfg, ArchState::new(memory(test)), &p).unwrap();
        prop_assert_eq!(a, b);
    }
}
