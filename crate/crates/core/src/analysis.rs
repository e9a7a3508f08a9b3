//! Decoder statistics over pass records: the argmax distribution, the
//! per-candidate mean profile, decoder accuracy over independent
//! experiments, and parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use std::io::Write;

use crate::harness::{
    build_attack_programs, derive_seed, leak_byte_with, AttackConfig, AttackError, DecodeRule,
    PassRecord, VictimSpec,
};
use crate::isa::{ArchState, Program, Reg};
use crate::mitigation::{apply_gadget, Gadget};
use crate::transient::{run, MicroConfig, NoiseModel};

const EXPERIMENT_STREAM: u64 = 0xe0;
const SECRET_STREAM: u64 = 0x5e;

/// Counts of per-pass argmax values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
}

impl Default for Histogram {
    fn default() -> Self {
        Histogram::new()
    }
}

impl Histogram {
    pub fn new() -> Histogram {
        Histogram {
            bins: vec![0; 256],
            total: 0,
        }
    }

    pub fn add(&mut self, value: u8) {
        self.bins[value as usize] += 1;
        self.total += 1;
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn get(&self, value: u8) -> u64 {
        self.bins[value as usize]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Most frequent value; the smallest one on ties.
    pub fn mode(&self) -> u8 {
        let mut best = 0;
        for (v, &c) in self.bins.iter().enumerate() {
            if c > self.bins[best] {
                best = v;
            }
        }
        best as u8
    }

    /// CSV with columns `test_num,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AttackError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test_num", "count"])?;
        for (v, c) in self.bins.iter().enumerate() {
            w.write_record([v.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn argmax_histogram(records: &[PassRecord]) -> Result<Histogram, AttackError> {
    if records.is_empty() {
        return Err(AttackError::EmptyInput("no pass records"));
    }
    let mut h = Histogram::new();
    for r in records {
        h.add(r.argmax);
    }
    Ok(h)
}

/// Running mean and variance of spend time per candidate (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileAccumulator {
    count: Vec<u64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ProfileAccumulator {
    pub fn new(candidates: usize) -> ProfileAccumulator {
        ProfileAccumulator {
            count: vec![0; candidates],
            mean: vec![0.0; candidates],
            m2: vec![0.0; candidates],
        }
    }

    pub fn push(&mut self, test_num: u8, spend: u64) {
        let i = test_num as usize;
        if i >= self.count.len() {
            self.count.resize(i + 1, 0);
            self.mean.resize(i + 1, 0.0);
            self.m2.resize(i + 1, 0.0);
        }
        let x = spend as f64;
        self.count[i] += 1;
        let delta = x - self.mean[i];
        self.mean[i] += delta / self.count[i] as f64;
        self.m2[i] += delta * (x - self.mean[i]);
    }

    pub fn add(&mut self, record: &PassRecord) {
        for &(t, spend) in &record.timings {
            self.push(t, spend);
        }
    }

    /// Candidate with the largest mean; the smallest one on ties.
    pub fn argmax_mean(&self) -> u8 {
        let mut best: Option<usize> = None;
        for i in 0..self.count.len() {
            if self.count[i] == 0 {
                continue;
            }
            if best.is_none_or(|b| self.mean[i] > self.mean[b]) {
                best = Some(i);
            }
        }
        best.unwrap_or(0) as u8
    }

    pub fn profile(&self) -> MeanProfile {
        let rows = (0..self.count.len())
            .filter(|&i| self.count[i] > 0)
            .map(|i| {
                let n = self.count[i];
                let var = if n > 1 {
                    self.m2[i] / (n - 1) as f64
                } else {
                    0.0
                };
                ProfileRow {
                    test_num: i as u8,
                    samples: n,
                    mean: self.mean[i],
                    stddev: var.max(0.0).sqrt(),
                }
            })
            .collect();
        MeanProfile { rows }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub test_num: u8,
    pub samples: u64,
    pub mean: f64,
    pub stddev: f64,
}

/// Mean and sample standard deviation of spend time per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanProfile {
    pub rows: Vec<ProfileRow>,
}

impl MeanProfile {
    pub fn row(&self, test_num: u8) -> Option<&ProfileRow> {
        self.rows.iter().find(|r| r.test_num == test_num)
    }

    /// CSV with columns `test_num,mean,stddev`, six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AttackError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["test_num", "mean", "stddev"])?;
        for r in &self.rows {
            w.write_record([
                r.test_num.to_string(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.stddev),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn mean_profile(records: &[PassRecord]) -> Result<MeanProfile, AttackError> {
    if records.is_empty() {
        return Err(AttackError::EmptyInput("no pass records"));
    }
    let mut acc = ProfileAccumulator::new(256);
    for r in records {
        acc.add(r);
    }
    Ok(acc.profile())
}

/// Where each experiment's secret comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SecretSource {
    /// The victim's own secret, every experiment.
    Fixed(VictimSpec),
    /// The victim with its secret replaced by fresh uniform bytes (same
    /// length) in every experiment.
    Uniform(VictimSpec),
}

impl SecretSource {
    pub fn template(&self) -> &VictimSpec {
        match self {
            SecretSource::Fixed(v) | SecretSource::Uniform(v) => v,
        }
    }

    fn victim_for(&self, base_seed: u64, experiment: usize) -> VictimSpec {
        match self {
            SecretSource::Fixed(v) => v.clone(),
            SecretSource::Uniform(v) => {
                let seed = derive_seed(base_seed, &[SECRET_STREAM, experiment as u64]);
                let mut rng = Pcg64Mcg::seed_from_u64(seed);
                let secret = (0..v.secret.len()).map(|_| rng.gen::<u8>()).collect();
                VictimSpec {
                    secret,
                    ..v.clone()
                }
            }
        }
    }
}

/// Decoded bytes of one independent leak attempt, under both rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExperimentOutcome {
    pub truth: Vec<u8>,
    pub argmax_mode: Vec<u8>,
    pub mean_max: Vec<u8>,
}

impl ExperimentOutcome {
    pub fn decoded(&self, rule: DecodeRule) -> &[u8] {
        match rule {
            DecodeRule::ArgmaxMode => &self.argmax_mode,
            DecodeRule::MeanMax => &self.mean_max,
        }
    }
}

/// Runs `experiments` independent leak attempts over the attack's offsets.
///
/// Experiment `e` uses seed `derive_seed(micro.rng_seed, [0xe0, e])`, so two
/// calls with the same base seed see identical noise (paired seeds) whatever
/// gadget or rule they compare. Both decoders read the same passes.
pub fn run_experiments(
    micro: &MicroConfig,
    attack: &AttackConfig,
    source: &SecretSource,
    gadget: Option<&Gadget>,
    experiments: usize,
) -> Result<Vec<ExperimentOutcome>, AttackError> {
    if experiments == 0 {
        return Err(AttackError::NoExperiments);
    }
    micro.validate()?;
    attack.validate()?;
    let template = source.template();
    template.validate()?;
    let micro = match gadget {
        Some(g) => g.configure(micro),
        None => micro.clone(),
    };
    let offsets = attack.offsets(template);
    let programs = offsets
        .iter()
        .map(|&o| {
            build_attack_programs(template, o, attack.to)?
                .into_iter()
                .map(|p| match gadget {
                    Some(g) => apply_gadget(&p, g),
                    None => Ok(p),
                })
                .collect::<Result<Vec<Program>, AttackError>>()
        })
        .collect::<Result<Vec<_>, AttackError>>()?;

    (0..experiments)
        .into_par_iter()
        .map(|e| {
            let victim = source.victim_for(micro.rng_seed, e);
            let exp_micro = MicroConfig {
                rng_seed: derive_seed(micro.rng_seed, &[EXPERIMENT_STREAM, e as u64]),
                ..micro.clone()
            };
            let mut out = ExperimentOutcome {
                truth: Vec::with_capacity(offsets.len()),
                argmax_mode: Vec::with_capacity(offsets.len()),
                mean_max: Vec::with_capacity(offsets.len()),
            };
            for (&offset, progs) in offsets.iter().zip(&programs) {
                let leak = leak_byte_with(&exp_micro, attack, &victim, progs, offset)?;
                out.truth.push(victim.secret[offset]);
                out.argmax_mode.push(leak.decode(DecodeRule::ArgmaxMode));
                out.mean_max.push(leak.decode(DecodeRule::MeanMax));
            }
            Ok(out)
        })
        .collect()
}

/// Correctly decoded bytes out of all bytes attempted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub hits: u64,
    pub trials: u64,
}

impl Accuracy {
    pub fn of(outcomes: &[ExperimentOutcome], rule: DecodeRule) -> Accuracy {
        let mut acc = Accuracy { hits: 0, trials: 0 };
        for o in outcomes {
            for (d, t) in o.decoded(rule).iter().zip(&o.truth) {
                acc.trials += 1;
                acc.hits += u64::from(d == t);
            }
        }
        acc
    }

    /// Fraction of hits; 1.0 when nothing was attempted.
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            1.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }
}

pub fn decoder_accuracy(
    micro: &MicroConfig,
    attack: &AttackConfig,
    source: &SecretSource,
    rule: DecodeRule,
    experiments: usize,
) -> Result<f64, AttackError> {
    let outcomes = run_experiments(micro, attack, source, None, experiments)?;
    Ok(Accuracy::of(&outcomes, rule).rate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoderComparison {
    pub experiments: usize,
    pub argmax_mode: Accuracy,
    pub mean_max: Accuracy,
}

/// Both decoders on identical measurements.
pub fn compare_decoders(
    micro: &MicroConfig,
    attack: &AttackConfig,
    source: &SecretSource,
    experiments: usize,
) -> Result<DecoderComparison, AttackError> {
    let outcomes = run_experiments(micro, attack, source, None, experiments)?;
    Ok(DecoderComparison {
        experiments,
        argmax_mode: Accuracy::of(&outcomes, DecodeRule::ArgmaxMode),
        mean_max: Accuracy::of(&outcomes, DecodeRule::MeanMax),
    })
}

/// Zero-noise timing gap between a matching and a non-matching candidate,
/// with `gadget` applied (and configured, for `hardware_off`).
pub fn signal_cycles(micro: &MicroConfig, gadget: Option<&Gadget>) -> Result<i64, AttackError> {
    let base = MicroConfig {
        noise: NoiseModel::none(),
        secret_transiently_readable: 1.0,
        ..micro.clone()
    };
    let micro = match gadget {
        Some(g) => g.configure(&base),
        None => base,
    };
    let secret = 0x41u8;
    let victim = VictimSpec::new([secret]);
    let time = |test_num: u8| -> Result<u64, AttackError> {
        let mut p = crate::harness::build_attack_program(&victim, 0, test_num)?;
        if let Some(g) = gadget {
            p = apply_gadget(&p, g)?;
        }
        let r = run(&micro, ArchState::new(victim.install()), &p)?;
        Ok(r.final_state.reg(Reg::R9) - r.final_state.reg(Reg::R8))
    };
    Ok(time(secret)? as i64 - time(secret - 1)? as i64)
}

/// Metric as a function of one swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: String,
    pub metric: String,
    pub grid: Vec<u64>,
    pub values: Vec<f64>,
}

impl SweepResult {
    /// CSV with a `<param>,<metric>` header, metric to six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AttackError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([self.param.as_str(), self.metric.as_str()])?;
        for (g, v) in self.grid.iter().zip(&self.values) {
            w.write_record([g.to_string(), format!("{v:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn check_grid(grid: &[u64]) -> Result<(), AttackError> {
    if grid.is_empty() {
        return Err(AttackError::EmptyInput("sweep grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AttackError::Config(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Zero-noise signal for each number of NOPs between the squash and JZ.
pub fn stall_window_sweep(micro: &MicroConfig, delays: &[u64]) -> Result<SweepResult, AttackError> {
    check_grid(delays)?;
    let values = delays
        .iter()
        .map(|&d| {
            let gadget = (d > 0).then(|| Gadget::delay(d as usize));
            signal_cycles(micro, gadget.as_ref()).map(|s| s as f64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        param: "delay".into(),
        metric: "signal_cycles".into(),
        grid: delays.to_vec(),
        values,
    })
}

/// Central interval of Binomial(`trials`, `p`) holding at least `level`
/// probability, as hit counts `(lo, hi)` inclusive.
pub fn binomial_interval(trials: u64, p: f64, level: f64) -> (u64, u64) {
    let dist = Binomial::new(p, trials).expect("valid binomial parameters");
    let tail = (1.0 - level) / 2.0;
    (dist.inverse_cdf(tail), dist.inverse_cdf(1.0 - tail))
}
