use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::isa::{ArchState, Flag, Opcode};

use super::{MicroConfig, NoiseModel};

/// A flag whose transient modification is still being reverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingRevert {
    pub flag: Flag,
    pub expires_at: u64,
}

/// An open transaction: the state to restore and where to resume.
#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    pub checkpoint: ArchState,
    pub fallback: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineState {
    pub cycle: u64,
    pub pending_revert: Option<PendingRevert>,
    pub transaction: Option<Transaction>,
}

impl PipelineState {
    pub fn in_transaction(&self) -> bool {
        self.transaction.is_some()
    }

    pub fn checkpoint(&self) -> Option<&ArchState> {
        self.transaction.as_ref().map(|t| &t.checkpoint)
    }

    /// Drops the pending revert once its window has passed.
    pub fn retire_expired(&mut self) {
        if matches!(self.pending_revert, Some(p) if self.cycle >= p.expires_at) {
            self.pending_revert = None;
        }
    }

    fn stalls(&self, flag: Flag) -> bool {
        matches!(self.pending_revert, Some(p) if p.flag == flag && self.cycle < p.expires_at)
    }
}

/// Cost of a jump issued at `pipeline.cycle`, and whether it stalled.
///
/// JZ/JE read ZF and pay `jcc_stall_penalty` while a ZF revert is pending.
/// JMP reads no flags and never stalls.
pub fn jcc_cost(config: &MicroConfig, pipeline: &PipelineState, opcode: Opcode) -> (u64, bool) {
    let base = config.base_latency.jump;
    let stalled = opcode.is_flag_dependent_jump() && pipeline.stalls(Flag::Zf);
    if stalled {
        (base + config.jcc_stall_penalty, true)
    } else {
        (base, false)
    }
}

/// Time-stamp read.
///
/// Returns the sampled counter and the noise cycles injected around the
/// read; `pipeline.cycle` advances by the noise.
pub fn rdtsc<R: Rng>(noise: &NoiseModel, pipeline: &mut PipelineState, rng: &mut R) -> (u64, u64) {
    if noise.is_none() {
        return (pipeline.cycle, 0);
    }
    let mut pre = rng.gen_range(0..=noise.per_sample_jitter);
    if noise.outlier_prob > 0.0 && rng.gen_bool(noise.outlier_prob) {
        pre += noise.outlier_magnitude;
    }
    pipeline.cycle += pre;
    let sample = pipeline.cycle;
    let post = rng.gen_range(0..=noise.per_sample_jitter);
    pipeline.cycle += post;
    (sample, pre + post)
}
