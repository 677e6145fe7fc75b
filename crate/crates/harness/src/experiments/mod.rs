//! Experiment implementations.

pub mod consistency;
pub mod edit;
pub mod embedding;
pub mod robustness;
pub mod undetectability;

use tokmark_core::channel::{
    apply_deletion, apply_edit_adversary, apply_hash_flip_per_block, apply_substitution,
    ChannelStage,
};
use tokmark_core::model::Transcript;
use tokmark_core::rng::{derive_rng, mix64};
use tokmark_core::token::Token;
use tokmark_core::watermark::WatermarkKey;

use crate::config::{ExperimentConfig, ExperimentKind, ResolvedStage};
use crate::report::ExperimentReport;
use crate::Result;

/// Run one experiment end to end.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let sw = crate::report::Stopwatch::start();
    let mut report = match cfg.experiment {
        ExperimentKind::Undetectability => undetectability::run(cfg)?,
        ExperimentKind::EmbeddingError => embedding::run(cfg)?,
        ExperimentKind::Robustness => robustness::run(cfg)?,
        ExperimentKind::Consistency => consistency::run(cfg)?,
        ExperimentKind::EditRobustness => edit::run(cfg)?,
    };
    report.wall_clock_secs = sw.secs();
    Ok(report)
}

/// Stable per-trial seed derivation.
pub fn trial_seed(master: u64, purpose: u64, index: u64) -> u64 {
    mix64(master ^ mix64(purpose.wrapping_mul(0x9e37_79b9).wrapping_add(index)))
}

/// Apply resolved channel stages; `hash_flip` stages are expanded per block
/// with the key's own hashes (white-box tester).
pub fn apply_resolved_stages(
    stages: &[ResolvedStage],
    tokens: &[Token],
    key: &WatermarkKey,
    seed: u64,
) -> Result<Vec<Token>> {
    let mut cur = tokens.to_vec();
    for (idx, stage) in stages.iter().enumerate() {
        let mut rng = derive_rng(seed, &[0xc4a1, idx as u64]);
        cur = match stage {
            ResolvedStage::Core(ChannelStage::Sub { map, p }) => {
                apply_substitution(&cur, map, *p, &mut rng)?
            }
            ResolvedStage::Core(ChannelStage::Del { p }) => apply_deletion(&cur, *p, &mut rng)?,
            ResolvedStage::Core(ChannelStage::Edit { budget, strategy }) => {
                apply_edit_adversary(&cur, *budget, strategy, key.params.vocab_size, &mut rng)?
            }
            ResolvedStage::HashFlipPerBlock { p } => apply_hash_flip_per_block(
                &cur,
                &key.hash_seeds,
                key.params.block_len as usize,
                key.params.vocab_size,
                *p,
                &mut rng,
            )?,
        };
    }
    Ok(cur)
}

/// Per-block embedding statistics extracted from a transcript.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockStat {
    pub steps: u64,
    pub entropy_steps: u64,
    pub success_entropy_steps: u64,
    pub failures: u64,
    pub failure_errors: u64,
    pub errors: u64,
}

impl BlockStat {
    pub fn error_rate(&self) -> f64 {
        self.errors as f64 / self.steps as f64
    }

    pub fn entropy_fraction(&self) -> f64 {
        self.entropy_steps as f64 / self.steps as f64
    }

    /// The favorable hash event: at least 1/4 of the one-bit-entropy steps
    /// landed in the success case.
    pub fn favorable_hash(&self) -> bool {
        self.entropy_steps > 0 && 4 * self.success_entropy_steps >= self.entropy_steps
    }
}

pub fn block_stats(tr: &Transcript, num_blocks: usize) -> Vec<BlockStat> {
    let mut stats = vec![BlockStat::default(); num_blocks];
    for s in &tr.steps {
        let Some(b) = s.block_index else { continue };
        let st = &mut stats[b as usize];
        st.steps += 1;
        let entropy_one = s.entropy_bits >= 1.0;
        if entropy_one {
            st.entropy_steps += 1;
        }
        match s.success {
            Some(true) => {
                if entropy_one {
                    st.success_entropy_steps += 1;
                }
            }
            Some(false) => {
                st.failures += 1;
                if s.hash_bit != s.prc_bit {
                    st.failure_errors += 1;
                }
            }
            None => {}
        }
        if s.hash_bit != s.prc_bit {
            st.errors += 1;
        }
    }
    stats
}
