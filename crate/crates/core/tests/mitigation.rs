mod common;

use common::bodies::random_case;
use common::stats::binomial_99;
use eflags_channel::analysis::{
    run_experiments, signal_cycles, stall_window_sweep, Accuracy, SecretSource,
};
use eflags_channel::harness::{build_attack_program, AttackConfig, DecodeRule, VictimSpec};
use eflags_channel::isa::{ArchState, Opcode, Reg};
use eflags_channel::mitigation::{apply_gadget, evaluate_mitigation, Gadget};
use eflags_channel::transient::{run, MicroConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

const GADGETS: [Gadget; 5] = [
    Gadget::Delay(1),
    Gadget::Delay(10),
    Gadget::LahfSahf,
    Gadget::PushfPopf,
    Gadget::HardwareOff,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Registers (AH aside under LAHF), flags, stack and memory at the end
    /// match the unmitigated run.
    #[test]
    fn gadgets_are_architecturally_transparent(seed: u64) {
        let mut rng = Pcg64Mcg::seed_from_u64(seed);
        let case = random_case(&mut rng, true);
        let micro = MicroConfig::noiseless();
        let plain = run(&micro, case.state.clone(), &case.program).unwrap().final_state;
        for g in GADGETS {
            let p = apply_gadget(&case.program, &g).unwrap();
            let mut out = run(&g.configure(&micro), case.state.clone(), &p).unwrap().final_state;
            if g == Gadget::LahfSahf {
                out.set_ah(plain.ah());
            }
            prop_assert_eq!(out.regs, plain.regs, "{}", g);
            prop_assert_eq!(out.flags, plain.flags);
            prop_assert_eq!(&out.stack, &plain.stack);
            prop_assert_eq!(&out.mem, &plain.mem);
        }
    }
}

#[test]
fn lahf_only_touches_ah() {
    let victim = VictimSpec::new(*b"A");
    let p = build_attack_program(&victim, 0, 0x41).unwrap();
    let mut state = ArchState::new(victim.install());
    state.set_reg(Reg::RAX, 0x1122_3344_5566_7788);
    let micro = MicroConfig::noiseless();
    let before = run(&micro, state.clone(), &p).unwrap().final_state;
    let after = run(&micro, state, &apply_gadget(&p, &Gadget::LahfSahf).unwrap())
        .unwrap()
        .final_state;
    assert_eq!(
        before.reg(Reg::RAX) & !0xff00,
        after.reg(Reg::RAX) & !0xff00
    );
}

/// Every secret and every candidate: the guarded JZ never stalls.
#[test]
fn rewrite_gadgets_are_complete() {
    let micro = MicroConfig::noiseless();
    for g in [Gadget::LahfSahf, Gadget::PushfPopf] {
        for secret in 0..=255u8 {
            let victim = VictimSpec::new([secret]);
            for t in 0..=255u8 {
                let p = apply_gadget(&build_attack_program(&victim, 0, t).unwrap(), &g).unwrap();
                let r = run(&micro, ArchState::new(victim.install()), &p).unwrap();
                let jz: Vec<_> = r.trace.iter().filter(|e| e.opcode == Opcode::Jz).collect();
                assert_eq!(jz.len(), 1);
                assert!(!jz[0].stalled, "{g} secret {secret} test {t}");
            }
        }
    }
}

/// Smallest delay that zeroes the signal equals the window.
#[test]
fn delay_threshold_equals_window() {
    for w in 6..=9u64 {
        let micro = MicroConfig {
            revert_stall_window: w,
            ..MicroConfig::default()
        };
        let smallest = (1..=16)
            .find(|&d| signal_cycles(&micro, Some(&Gadget::Delay(d))).unwrap() == 0)
            .unwrap();
        assert_eq!(smallest as u64, w);
    }
}

#[test]
fn step_function_sweep() {
    let micro = MicroConfig::default();
    let grid: Vec<u64> = (0..=12).collect();
    let sweep = stall_window_sweep(&micro, &grid).unwrap();
    let expected: Vec<f64> = grid
        .iter()
        .map(|&d| {
            if d < micro.revert_stall_window {
                micro.jcc_stall_penalty as f64
            } else {
                0.0
            }
        })
        .collect();
    assert_eq!(sweep.values, expected);
    assert!(stall_window_sweep(&micro, &[]).is_err());
    assert!(stall_window_sweep(&micro, &[3, 2]).is_err());
}

fn small_attack(passes: usize) -> AttackConfig {
    AttackConfig {
        passes,
        ..AttackConfig::default()
    }
}

#[test]
fn short_delay_changes_nothing_but_cost() {
    let micro = MicroConfig::default();
    let source = SecretSource::Uniform(VictimSpec::new(*b"X"));
    let r = evaluate_mitigation(&micro, &small_attack(50), &source, &Gadget::Delay(4), 20).unwrap();
    assert_eq!(r.signal_before, micro.jcc_stall_penalty as i64);
    assert_eq!(r.signal_after, micro.jcc_stall_penalty as i64);
    // Paired seeds and a constant shift: identical decodes.
    assert_eq!(r.mitigated, r.baseline);
}

#[test]
fn complete_gadgets_zero_the_signal() {
    let micro = MicroConfig::default();
    for g in [
        Gadget::Delay(8),
        Gadget::Delay(10),
        Gadget::LahfSahf,
        Gadget::PushfPopf,
        Gadget::HardwareOff,
    ] {
        assert_eq!(signal_cycles(&micro, Some(&g)).unwrap(), 0, "{g}");
    }
    // Hardware fix holds whatever delay the program carries.
    let off = Gadget::HardwareOff.configure(&micro);
    for d in 1..=12 {
        assert_eq!(signal_cycles(&off, Some(&Gadget::Delay(d))).unwrap(), 0);
    }
}

#[test]
fn mitigated_accuracy_is_at_chance() {
    let micro = MicroConfig::default();
    let attack = small_attack(5);
    let source = SecretSource::Uniform(VictimSpec::new(*b"X"));
    let n = 1500;
    let (lo, hi) = binomial_99(n as u64, 1.0 / 256.0);
    for g in [
        Gadget::Delay(10),
        Gadget::LahfSahf,
        Gadget::PushfPopf,
        Gadget::HardwareOff,
    ] {
        let out = run_experiments(&micro, &attack, &source, Some(&g), n).unwrap();
        let acc = Accuracy::of(&out, DecodeRule::ArgmaxMode);
        assert!(
            (lo..=hi).contains(&acc.hits),
            "{g}: {} not in [{lo}, {hi}]",
            acc.hits
        );
    }
}

#[test]
fn zero_noise_complete_mitigation_decodes_zero() {
    let micro = MicroConfig::noiseless();
    let source = SecretSource::Fixed(VictimSpec::new(*b"\x9c"));
    let out = run_experiments(
        &micro,
        &small_attack(1),
        &source,
        Some(&Gadget::PushfPopf),
        1,
    )
    .unwrap();
    assert_eq!(out[0].argmax_mode, vec![0]);
}
