//! Output-distribution preservation, two ways.
//!
//! Exact mode enumerates the law of every embedding step along sampled
//! trajectories, with the codeword bit replaced by a uniform coin (the
//! ideal-world reference), and reports the worst absolute deviation from the
//! model's next-token law. Sampled mode generates embedded and plain corpora
//! and compares per-position token counts batch-by-batch with two-sample
//! chi-square tests, whose p-values must look uniform.

use tokmark_core::dist::TokenDist;
use tokmark_core::exec::{map_indexed, ExecMode};
use tokmark_core::hash::{hash_sample, BlockHash};
use tokmark_core::model::generate_plain;
use tokmark_core::rng::derive_rng;
use tokmark_core::token::Token;
use tokmark_core::watermark::{wm_generate_with, EmbedMode};

use crate::config::ExperimentConfig;
use crate::report::ExperimentReport;
use crate::stats::{chi2_sf, chi2_two_sample, ks_distance_uniform};
use crate::{HarnessError, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.trials.mode.as_str() {
        "exact" => run_exact(cfg),
        "sampled" => run_sampled(cfg),
        other => Err(HarnessError::Config(format!(
            "undetectability mode must be `exact` or `sampled`, got `{other}`"
        ))),
    }
}

/// Exact law of one embedding step for a fixed hash, marginalized over the
/// uniform codeword bit and the tie-break coin.
pub fn enumerate_step_law(dist: &TokenDist, hash: &BlockHash, target: Token) -> f64 {
    let mut total = 0.0;
    for &(t0, p0) in dist.support() {
        for &(t1, p1) in dist.support() {
            let w = p0 * p1;
            let (b0, b1) = (hash.eval(t0), hash.eval(t1));
            if b0 != b1 {
                for ci in [false, true] {
                    let picked = if b0 == ci { t0 } else { t1 };
                    if picked == target {
                        total += 0.5 * w;
                    }
                }
            } else {
                for coin in [false, true] {
                    if (if coin { t1 } else { t0 }) == target {
                        total += 0.5 * w;
                    }
                }
            }
        }
    }
    total
}

fn run_exact(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model.build()?;
    if model.vocab.size() > 16 {
        return Err(HarnessError::Config(
            "exact mode enumerates the vocabulary; it requires vocab_size <= 16".into(),
        ));
    }
    if let Some(key) = &cfg.key {
        if key.variant.as_str() != "oracle" {
            return Err(HarnessError::Config(
                "exact mode substitutes ideal uniform codeword bits and only \
                 accepts the oracle code family"
                    .into(),
            ));
        }
    }
    let mut report = ExperimentReport::new(cfg);
    let trajectories = 8u64;
    let steps = (model.max_len - 1).min(48) as usize;
    let hashes_per_step = 16u64;

    let devs: Vec<f64> = map_indexed(ExecMode::default(), trajectories as usize, |tr| {
        let mut rng = derive_rng(cfg.seed, &[0xe4ac, tr as u64]);
        let mut prefix: Vec<Token> = Vec::new();
        let mut worst = 0.0f64;
        for step in 0..steps {
            let dist = model.next_dist("preset", &prefix).unwrap();
            for h in 0..hashes_per_step {
                let hash = hash_sample(
                    cfg.seed ^ (tr as u64) << 20 ^ h << 8,
                    step as u32,
                );
                for t in model.vocab.tokens() {
                    let law = enumerate_step_law(&dist, &hash, t);
                    worst = worst.max((law - dist.prob(t)).abs());
                }
            }
            prefix.push(dist.sample(&mut rng));
        }
        worst
    });
    let max_dev = devs.iter().cloned().fold(0.0, f64::max);
    report.metric("max_abs_law_deviation", max_dev, 0.0);
    report.metric("steps_enumerated", (trajectories as usize * steps) as f64, 0.0);
    report.verdict_le("exact_law_deviation", max_dev, 1e-12);
    Ok(report)
}

fn run_sampled(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model.build()?;
    let samples = cfg.trials.samples;
    if samples < 100_000 {
        return Err(HarnessError::Config(
            "sampled mode needs at least 100000 samples".into(),
        ));
    }
    let key_cfg = cfg
        .key
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sampled mode needs a key".into()))?;
    let key = key_cfg.build(&cfg.model, cfg.seed ^ 0x5a3)?;

    let m = model.max_len as usize;
    let vocab = model.vocab.size() as usize;
    let batches = 32usize;
    let per_batch = (samples as usize / batches).max(1);

    // counts[corpus][batch][position][token]
    let count_corpus = |purpose: u64, watermarked: bool| -> Vec<Vec<Vec<u64>>> {
        let batch_counts: Vec<Vec<Vec<u64>>> = map_indexed(ExecMode::default(), batches, |b| {
            let mut counts = vec![vec![0u64; vocab]; m];
            for s in 0..per_batch {
                let seed = super::trial_seed(cfg.seed, purpose, (b * per_batch + s) as u64);
                let tokens = if watermarked {
                    wm_generate_with(&key, &model, "preset", seed, EmbedMode::IdealCodeword)
                        .unwrap()
                        .0
                } else {
                    generate_plain(&model, "preset", seed).unwrap().0
                };
                for (pos, t) in tokens.iter().enumerate() {
                    counts[pos][t.id() as usize] += 1;
                }
            }
            counts
        });
        batch_counts
    };

    let wm_counts = count_corpus(1, true);
    let plain_counts = count_corpus(2, false);

    let mut pvalues = Vec::with_capacity(batches * m);
    for b in 0..batches {
        for pos in 0..m {
            let a = &wm_counts[b][pos];
            let c = &plain_counts[b][pos];
            // positions past forced termination are constant in both corpora
            if a.iter().filter(|&&x| x > 0).count() <= 1
                && c.iter().filter(|&&x| x > 0).count() <= 1
            {
                continue;
            }
            let (stat, df) = chi2_two_sample(a, c);
            pvalues.push(chi2_sf(stat, df));
        }
    }
    let mut report = ExperimentReport::new(cfg);
    if pvalues.len() < 1000 {
        return Err(HarnessError::Config(format!(
            "sampled mode produced only {} informative position/batch cells; \
             increase samples or output length",
            pvalues.len()
        )));
    }
    let ks = ks_distance_uniform(&pvalues);
    report.metric("chi2_pvalue_cells", pvalues.len() as f64, 0.0);
    report.metric("ks_distance_uniform", ks, 0.0);
    report.verdict_le("pvalue_uniformity_ks", ks, 0.05);
    Ok(report)
}
