//! Per-block embedding error: the fraction of blocks whose error rate stays
//! under `1/2 - delta'/16`, and the concentration envelope on failure-case
//! errors within favorable-hash blocks.
//!
//! Block hashes are fixed by a key, so independent blocks come from fresh
//! keys: every run draws its own key.

use tokmark_core::exec::{map_indexed, ExecMode};
use tokmark_core::watermark::wm_generate;

use crate::config::ExperimentConfig;
use crate::experiments::{block_stats, trial_seed, BlockStat};
use crate::report::ExperimentReport;
use crate::stats::rate_ci_half;
use crate::{HarnessError, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model.build()?;
    let key_cfg = cfg
        .key
        .as_ref()
        .ok_or_else(|| HarnessError::Config("embedding_error needs a key".into()))?;
    let block_len = key_cfg.block_len as f64;
    let blocks_per_run = (model.max_len as f64 / block_len).floor() as u64;
    let runs = cfg.trials.runs;
    if runs * blocks_per_run < cfg.trials.min_blocks {
        return Err(HarnessError::Config(format!(
            "{} runs x {} blocks < min_blocks {}",
            runs, blocks_per_run, cfg.trials.min_blocks
        )));
    }
    let delta = cfg.trials.delta;
    let delta_prime = cfg.trials.delta_prime;
    let error_bound = 0.5 - delta_prime / 16.0;
    let envelope_excess = delta_prime * block_len / 16.0;
    let envelope_bound = (-delta_prime * delta_prime * block_len / 32.0).exp() + 0.005;

    let per_run: Vec<Vec<BlockStat>> = map_indexed(ExecMode::default(), runs as usize, |r| {
        let key_seed = trial_seed(cfg.seed, 10, r as u64);
        let key = key_cfg.build(&cfg.model, key_seed).expect("key builds");
        let (_, tr) = wm_generate(&key, &model, "preset", trial_seed(cfg.seed, 11, r as u64))
            .expect("generation succeeds");
        block_stats(&tr, key.params.num_blocks() as usize)
    });

    let mut eligible = 0u64;
    let mut under_bound = 0u64;
    let mut favorable = 0u64;
    let mut envelope_violations = 0u64;
    let mut error_sum = 0.0;
    let mut total_blocks = 0u64;
    let mut histogram = vec![0u64; 20];
    for stats in &per_run {
        for b in stats {
            if b.steps == 0 {
                continue;
            }
            total_blocks += 1;
            let err = b.error_rate();
            error_sum += err;
            histogram[((err * 20.0) as usize).min(19)] += 1;
            if b.entropy_fraction() + 1e-12 >= delta / 4.0 {
                eligible += 1;
                if err <= error_bound {
                    under_bound += 1;
                }
                if b.favorable_hash() {
                    favorable += 1;
                    let excess =
                        b.failure_errors as f64 - b.failures as f64 / 2.0;
                    if excess >= envelope_excess {
                        envelope_violations += 1;
                    }
                }
            }
        }
    }

    let mut report = ExperimentReport::new(cfg);
    report.metric("blocks_total", total_blocks as f64, 0.0);
    report.metric("blocks_eligible", eligible as f64, 0.0);
    report.metric("blocks_favorable_hash", favorable as f64, 0.0);
    let mean_error = error_sum / total_blocks as f64;
    report.metric("mean_block_error", mean_error, 0.0);
    for (i, &c) in histogram.iter().enumerate() {
        report.metric(
            format!("error_hist_{:.2}_{:.2}", i as f64 / 20.0, (i + 1) as f64 / 20.0),
            c as f64,
            0.0,
        );
    }

    if delta_prime > 0.0 {
        if eligible == 0 {
            return Err(HarnessError::Config(
                "no blocks met the entropy-fraction gate".into(),
            ));
        }
        let frac_under = under_bound as f64 / eligible as f64;
        report.metric(
            "fraction_blocks_error_le_bound",
            frac_under,
            rate_ci_half(frac_under, eligible),
        );
        report.metric("block_error_bound", error_bound, 0.0);
        report.verdict_ge("block_error_fraction_lower", frac_under, 0.24);

        let env_rate = if favorable > 0 {
            envelope_violations as f64 / favorable as f64
        } else {
            1.0
        };
        report.metric(
            "envelope_violation_rate",
            env_rate,
            rate_ci_half(env_rate, favorable.max(1)),
        );
        report.metric("envelope_bound", envelope_bound, 0.0);
        report.verdict_le("failure_error_envelope", env_rate, envelope_bound);
    } else {
        // degenerate zero-entropy reference: every step is a fair coin
        report.verdict_le("mean_error_near_half_hi", mean_error, 0.51);
        report.verdict_ge("mean_error_near_half_lo", mean_error, 0.49);
    }
    Ok(report)
}
