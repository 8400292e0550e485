//! Training compute accounting for dense decoder-only transformers.
//!
//! Per-token forward cost is split into a dense part (every weight matrix is
//! touched once per token, two FLOPs per multiply-accumulate) and an attention
//! core that grows linearly with sequence length. Backward costs twice the
//! forward pass, so one training token costs three forward tokens.
//!
//! All per-step quantities are computed in `u128` integer arithmetic and only
//! converted to `f64` at the boundary, so reduction identities between the
//! algorithms hold exactly.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;
use thiserror::Error;

pub const FLOPS_PER_EXAFLOP: f64 = 1e18;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlopsError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("FLOP count overflows 128-bit accumulator")]
    Overflow,
    #[error("empty step sequence")]
    EmptySequence,
}

pub type Result<T> = std::result::Result<T, FlopsError>;

/// Architecture parameters needed by the per-token cost formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: u64,
    pub hidden_size: u64,
    pub ffn_intermediate: u64,
    pub vocab_size: u64,
    /// Total key (or value) projection width across all KV heads.
    pub kv_total_dim: u64,
}

impl ModelConfig {
    pub fn new(
        num_layers: u64,
        hidden_size: u64,
        ffn_intermediate: u64,
        vocab_size: u64,
        kv_total_dim: u64,
    ) -> Result<Self> {
        let cfg = ModelConfig {
            num_layers,
            hidden_size,
            ffn_intermediate,
            vocab_size,
            kv_total_dim,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("ffn_intermediate", self.ffn_intermediate),
            ("vocab_size", self.vocab_size),
            ("kv_total_dim", self.kv_total_dim),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(FlopsError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.kv_total_dim > self.hidden_size {
            return Err(FlopsError::InvalidConfig(format!(
                "kv_total_dim ({}) exceeds hidden_size ({})",
                self.kv_total_dim, self.hidden_size
            )));
        }
        Ok(())
    }

    /// SwiGLU MLP weights per layer: gate, up and down projections.
    pub fn mlp_params(&self) -> u128 {
        3 * self.hidden_size as u128 * self.ffn_intermediate as u128
    }

    /// Q, K, V, O projection weights per layer.
    pub fn attn_linear_params(&self) -> u128 {
        let h = self.hidden_size as u128;
        2 * h * (h + self.kv_total_dim as u128)
    }

    /// Embedding plus LM head.
    pub fn vocab_params(&self) -> u128 {
        2 * self.vocab_size as u128 * self.hidden_size as u128
    }

    pub fn dense_flops_per_token(&self) -> u128 {
        let layers = self.num_layers as u128;
        2 * (layers * (self.mlp_params() + self.attn_linear_params()) + self.vocab_params())
    }

    pub fn attn_core_flops_per_token(&self, seq_len: u64) -> u128 {
        4 * seq_len as u128 * self.num_layers as u128 * self.hidden_size as u128
    }
}

/// A nonnegative number of floating-point operations.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlopCount(f64);

impl FlopCount {
    pub const ZERO: FlopCount = FlopCount(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(FlopsError::Domain(format!(
                "FLOP count must be finite and >= 0, got {value}"
            )));
        }
        Ok(FlopCount(value))
    }

    pub fn from_exaflops(exa: f64) -> Result<Self> {
        Self::new(exa * FLOPS_PER_EXAFLOP)
    }

    fn from_int(v: u128) -> Self {
        FlopCount(v as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn exaflops(self) -> f64 {
        self.0 / FLOPS_PER_EXAFLOP
    }
}

impl Add for FlopCount {
    type Output = FlopCount;
    fn add(self, rhs: FlopCount) -> FlopCount {
        FlopCount(self.0 + rhs.0)
    }
}

impl Sum for FlopCount {
    fn sum<I: Iterator<Item = FlopCount>>(iter: I) -> FlopCount {
        iter.fold(FlopCount::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for FlopCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.1} exaFLOPs",
            crate::analysis::round_half_even(self.exaflops(), 1)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sft,
    Grpo,
    Dapo,
    /// Expert trajectories mixed into the RL batch (LUFFY, SRFT).
    Hybrid,
    Upt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Sft,
        Algorithm::Grpo,
        Algorithm::Dapo,
        Algorithm::Hybrid,
        Algorithm::Upt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sft => "sft",
            Algorithm::Grpo => "grpo",
            Algorithm::Dapo => "dapo",
            Algorithm::Hybrid => "hybrid",
            Algorithm::Upt => "upt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = FlopsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sft" => Ok(Algorithm::Sft),
            "grpo" => Ok(Algorithm::Grpo),
            "dapo" => Ok(Algorithm::Dapo),
            "hybrid" | "luffy" | "srft" => Ok(Algorithm::Hybrid),
            "upt" => Ok(Algorithm::Upt),
            other => Err(FlopsError::Domain(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// One training step's shape. Fields that do not apply to `algorithm` are
/// left at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub algorithm: Algorithm,
    /// `B` for SFT/GRPO/Hybrid, `B_gen` for DAPO.
    #[serde(default)]
    pub batch: u64,
    #[serde(default)]
    pub update_batch: u64,
    #[serde(default)]
    pub sampling_rounds: u64,
    #[serde(default)]
    pub group_size: u64,
    #[serde(default)]
    pub expert_per_prompt: u64,
    #[serde(default)]
    pub on_policy_kept: u64,
    #[serde(default)]
    pub off_policy_kept: u64,
    #[serde(default)]
    pub avg_seq_len: u64,
    #[serde(default)]
    pub avg_on_len: u64,
    #[serde(default)]
    pub avg_off_len: u64,
}

impl StepSpec {
    pub fn empty(algorithm: Algorithm) -> Self {
        StepSpec {
            algorithm,
            batch: 0,
            update_batch: 0,
            sampling_rounds: 0,
            group_size: 0,
            expert_per_prompt: 0,
            on_policy_kept: 0,
            off_policy_kept: 0,
            avg_seq_len: 0,
            avg_on_len: 0,
            avg_off_len: 0,
        }
    }

    pub fn sft(batch: u64, avg_seq_len: u64) -> Self {
        StepSpec {
            batch,
            avg_seq_len,
            ..Self::empty(Algorithm::Sft)
        }
    }

    pub fn grpo(batch: u64, group_size: u64, avg_seq_len: u64) -> Self {
        StepSpec {
            batch,
            group_size,
            avg_seq_len,
            ..Self::empty(Algorithm::Grpo)
        }
    }

    pub fn dapo(sampling_rounds: u64, gen_batch: u64, train_batch: u64, group_size: u64, avg_seq_len: u64) -> Self {
        StepSpec {
            sampling_rounds,
            batch: gen_batch,
            update_batch: train_batch,
            group_size,
            avg_seq_len,
            ..Self::empty(Algorithm::Dapo)
        }
    }

    pub fn hybrid(batch: u64, group_size: u64, expert_per_prompt: u64, avg_on_len: u64, avg_off_len: u64) -> Self {
        StepSpec {
            batch,
            group_size,
            expert_per_prompt,
            avg_on_len,
            avg_off_len,
            ..Self::empty(Algorithm::Hybrid)
        }
    }

    pub fn upt(group_size: u64, on_kept: u64, off_kept: u64, avg_on_len: u64, avg_off_len: u64) -> Self {
        StepSpec {
            group_size,
            on_policy_kept: on_kept,
            off_policy_kept: off_kept,
            avg_on_len,
            avg_off_len,
            ..Self::empty(Algorithm::Upt)
        }
    }

    /// Exact FLOPs for this step.
    pub fn flops(&self, cfg: &ModelConfig) -> Result<FlopCount> {
        self.flops_exact(cfg).map(FlopCount::from_int)
    }

    pub fn flops_exact(&self, cfg: &ModelConfig) -> Result<u128> {
        match self.algorithm {
            Algorithm::Sft => sft_exact(cfg, self.batch, self.avg_seq_len),
            Algorithm::Grpo => grpo_exact(cfg, self.batch, self.group_size, self.avg_seq_len),
            Algorithm::Dapo => dapo_exact(
                cfg,
                self.sampling_rounds,
                self.batch,
                self.update_batch,
                self.group_size,
                self.avg_seq_len,
            ),
            Algorithm::Hybrid => hybrid_exact(
                cfg,
                self.batch,
                self.group_size,
                self.expert_per_prompt,
                self.avg_on_len,
                self.avg_off_len,
            ),
            Algorithm::Upt => upt_exact(
                cfg,
                self.group_size,
                self.on_policy_kept,
                self.off_policy_kept,
                self.avg_on_len,
                self.avg_off_len,
            ),
        }
    }
}

fn mul(parts: &[u128]) -> Result<u128> {
    parts
        .iter()
        .try_fold(1u128, |acc, &p| acc.checked_mul(p))
        .ok_or(FlopsError::Overflow)
}

fn add(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b).ok_or(FlopsError::Overflow)
}

fn require_positive(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        Err(FlopsError::Domain(format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

/// Forward FLOPs per token, exact.
pub fn forward_exact(cfg: &ModelConfig, seq_len: u64) -> Result<u128> {
    cfg.validate()?;
    require_positive("seq_len", seq_len)?;
    add(cfg.dense_flops_per_token(), cfg.attn_core_flops_per_token(seq_len))
}

/// `S * F_tok(S)`, the forward cost of one sequence of length `S`. A zero
/// length contributes nothing.
fn sequence_forward(cfg: &ModelConfig, seq_len: u64) -> Result<u128> {
    if seq_len == 0 {
        return Ok(0);
    }
    mul(&[seq_len as u128, forward_exact(cfg, seq_len)?])
}

pub fn forward_flops_per_token(cfg: &ModelConfig, seq_len: u64) -> Result<FlopCount> {
    forward_exact(cfg, seq_len).map(FlopCount::from_int)
}

/// Forward plus backward (twice the forward) per token.
pub fn train_flops_per_token(cfg: &ModelConfig, seq_len: u64) -> Result<FlopCount> {
    forward_exact(cfg, seq_len)
        .and_then(|f| mul(&[3, f]))
        .map(FlopCount::from_int)
}

fn sft_exact(cfg: &ModelConfig, batch: u64, seq_len: u64) -> Result<u128> {
    require_positive("batch", batch)?;
    mul(&[3, batch as u128, seq_len as u128, forward_exact(cfg, seq_len)?])
}

pub fn sft_step_flops(cfg: &ModelConfig, batch: u64, avg_seq_len: u64) -> Result<FlopCount> {
    sft_exact(cfg, batch, avg_seq_len).map(FlopCount::from_int)
}

fn grpo_exact(cfg: &ModelConfig, batch: u64, group_size: u64, seq_len: u64) -> Result<u128> {
    require_positive("batch", batch)?;
    require_positive("group_size", group_size)?;
    mul(&[
        4,
        batch as u128,
        group_size as u128,
        seq_len as u128,
        forward_exact(cfg, seq_len)?,
    ])
}

/// One generation pass and one update (3x forward) over every sampled response.
pub fn grpo_step_flops(cfg: &ModelConfig, batch: u64, group_size: u64, avg_seq_len: u64) -> Result<FlopCount> {
    grpo_exact(cfg, batch, group_size, avg_seq_len).map(FlopCount::from_int)
}

fn dapo_exact(
    cfg: &ModelConfig,
    sampling_rounds: u64,
    gen_batch: u64,
    train_batch: u64,
    group_size: u64,
    seq_len: u64,
) -> Result<u128> {
    require_positive("sampling_rounds", sampling_rounds)?;
    require_positive("gen_batch", gen_batch)?;
    require_positive("train_batch", train_batch)?;
    require_positive("group_size", group_size)?;
    let generated = sampling_rounds as u128 * gen_batch as u128;
    if train_batch as u128 > generated {
        return Err(FlopsError::Domain(format!(
            "train_batch ({train_batch}) exceeds sampling_rounds * gen_batch ({generated})"
        )));
    }
    let prompts = add(generated, 3 * train_batch as u128)?;
    mul(&[
        prompts,
        group_size as u128,
        seq_len as u128,
        forward_exact(cfg, seq_len)?,
    ])
}

/// Dynamic-sampling RL: `K` generation rounds of `B_gen` prompts, then an
/// update over the `B_train` surviving prompts.
pub fn dapo_step_flops(
    cfg: &ModelConfig,
    sampling_rounds: u64,
    gen_batch: u64,
    train_batch: u64,
    group_size: u64,
    avg_seq_len: u64,
) -> Result<FlopCount> {
    dapo_exact(cfg, sampling_rounds, gen_batch, train_batch, group_size, avg_seq_len).map(FlopCount::from_int)
}

fn hybrid_exact(
    cfg: &ModelConfig,
    batch: u64,
    group_size: u64,
    expert_per_prompt: u64,
    on_len: u64,
    off_len: u64,
) -> Result<u128> {
    require_positive("batch", batch)?;
    require_positive("group_size", group_size)?;
    require_positive("avg_on_len", on_len)?;
    if expert_per_prompt > 0 {
        require_positive("avg_off_len", off_len)?;
    }
    let b = batch as u128;
    let on = mul(&[b, group_size as u128, sequence_forward(cfg, on_len)?])?;
    let off = if expert_per_prompt == 0 {
        0
    } else {
        mul(&[b, expert_per_prompt as u128, sequence_forward(cfg, off_len)?])?
    };
    mul(&[4, add(on, off)?])
}

/// LUFFY/SRFT-style step: `G` on-policy rollouts plus `N` expert
/// trajectories per prompt, each charged a forward and an update.
pub fn hybrid_step_flops(
    cfg: &ModelConfig,
    batch: u64,
    group_size: u64,
    expert_per_prompt: u64,
    avg_on_len: u64,
    avg_off_len: u64,
) -> Result<FlopCount> {
    hybrid_exact(cfg, batch, group_size, expert_per_prompt, avg_on_len, avg_off_len).map(FlopCount::from_int)
}

fn upt_exact(
    cfg: &ModelConfig,
    group_size: u64,
    on_kept: u64,
    off_kept: u64,
    on_len: u64,
    off_len: u64,
) -> Result<u128> {
    require_positive("group_size", group_size)?;
    require_positive("avg_on_len", on_len)?;
    if off_kept > 0 {
        require_positive("avg_off_len", off_len)?;
    }
    let on_seq = sequence_forward(cfg, on_len)?;
    let gen = mul(&[group_size as u128, on_seq])?;
    let train_on = mul(&[on_kept as u128, on_seq])?;
    let train_off = if off_kept == 0 {
        0
    } else {
        mul(&[off_kept as u128, sequence_forward(cfg, off_len)?])?
    };
    add(gen, mul(&[3, add(train_on, train_off)?])?)
}

/// UPT step: generation over `G` rollouts, update over the kept on-policy
/// and off-policy samples.
pub fn upt_step_flops(
    cfg: &ModelConfig,
    group_size: u64,
    on_kept: u64,
    off_kept: u64,
    avg_on_len: u64,
    avg_off_len: u64,
) -> Result<FlopCount> {
    upt_exact(cfg, group_size, on_kept, off_kept, avg_on_len, avg_off_len).map(FlopCount::from_int)
}

/// Running total of per-step FLOPs. The sum is kept in exact integer form.
pub fn accumulate_run_flops(cfg: &ModelConfig, steps: &[StepSpec]) -> Result<Vec<FlopCount>> {
    if steps.is_empty() {
        return Err(FlopsError::EmptySequence);
    }
    let mut total: u128 = 0;
    steps
        .iter()
        .map(|s| {
            total = add(total, s.flops_exact(cfg)?)?;
            Ok(FlopCount::from_int(total))
        })
        .collect()
}
