//! Edit-budget robustness: the recoverable-block counting bound and
//! detection under uniform and block-targeting edit adversaries.
//!
//! A block is recoverable when it met the entropy gate, drew a favorable
//! hash, and embedded with error rate at most `1/2 - delta/64`. Corrupting a
//! recoverable block costs at least `eps_edit * block_len` edits, so a
//! budget below `eps_edit * delta * alpha / 18` of the output cannot touch
//! them all whenever the recoverable fraction is at least
//! `delta * alpha / 17`. The white-box targeting adversary spends its budget
//! on exactly the measured recoverable set; detection collapses only once
//! the budget covers that whole set.

use tokmark_core::channel::EditStrategy;
use tokmark_core::exec::{map_indexed, ExecMode};
use tokmark_core::watermark::{wm_detect, wm_generate, DetectMode};

use crate::config::{ExperimentConfig, KeyCfg};
use crate::experiments::{block_stats, trial_seed};
use crate::report::ExperimentReport;
use crate::stats::rate_ci_half;
use crate::{HarnessError, Result};

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model.build()?;
    let key_cfg = cfg
        .key
        .as_ref()
        .ok_or_else(|| HarnessError::Config("edit_robustness needs a key".into()))?;
    let delta = cfg.trials.delta;
    let alpha_cov = cfg.trials.alpha_coverage;
    let eps_edit = cfg.trials.eps_edit;
    let block_len = key_cfg.block_len as usize;
    let m = model.max_len as usize;
    let k = m / block_len;
    let per_block_edits = (eps_edit * block_len as f64).ceil() as usize;
    let recoverable_error_bound = 0.5 - delta / 64.0;
    let count_bound = (delta * k as f64 / 16.0).ceil() as u64;
    let freq_bound = 1.0 - (-2.0 * delta * delta * k as f64 / 256.0).exp() - 0.01;

    let mut report = ExperimentReport::new(cfg);

    // --- counting: fresh keys per run, transcript-only ---
    let counting_runs = cfg.trials.runs as usize;
    let uncalibrated = KeyCfg {
        calibration_trials: 0,
        ..key_cfg.clone()
    };
    let counts: Vec<(u64, u64)> = map_indexed(ExecMode::default(), counting_runs, |r| {
        let key = uncalibrated
            .build(&cfg.model, trial_seed(cfg.seed, 50, r as u64))
            .expect("key builds");
        let (_, tr) = wm_generate(&key, &model, "preset", trial_seed(cfg.seed, 51, r as u64))
            .expect("generation succeeds");
        let stats = block_stats(&tr, key.params.num_blocks() as usize);
        let recoverable = stats
            .iter()
            .filter(|b| {
                b.steps as usize == block_len
                    && b.entropy_fraction() + 1e-12 >= delta / 4.0
                    && b.favorable_hash()
                    && b.error_rate() <= recoverable_error_bound
            })
            .count() as u64;
        (recoverable, k as u64)
    });
    let freq = counts
        .iter()
        .filter(|(rc, _)| *rc >= count_bound)
        .count() as f64
        / counting_runs as f64;
    let mean_recoverable =
        counts.iter().map(|(rc, _)| *rc as f64).sum::<f64>() / counting_runs as f64;
    report.metric("recoverable_count_bound", count_bound as f64, 0.0);
    report.metric("mean_recoverable_blocks", mean_recoverable, 0.0);
    report.metric(
        "freq_recoverable_ge_bound",
        freq,
        rate_ci_half(freq, counting_runs as u64),
    );
    report.verdict_ge("recoverable_counting_lower", freq, freq_bound);

    // --- counting identity: the below-bound budget cannot cover the
    // recoverable set whenever its fraction clears delta*alpha/17 ---
    let budget_below = eps_edit * delta * alpha_cov / 18.0;
    let below_edits = (budget_below * m as f64).floor() as u64;
    let mut identity_violations = 0u64;
    let mut identity_checked = 0u64;
    for (rc, total) in &counts {
        if *rc as f64 / *total as f64 >= delta * alpha_cov / 17.0 {
            identity_checked += 1;
            if below_edits >= rc * per_block_edits as u64 {
                identity_violations += 1;
            }
        }
    }
    report.metric("counting_identity_checked_runs", identity_checked as f64, 0.0);
    report.verdict_le(
        "below_bound_budget_cannot_cover",
        identity_violations as f64,
        0.0,
    );

    // --- detection under edit adversaries: one calibrated key ---
    let key = key_cfg.build(&cfg.model, cfg.seed ^ 0xed17)?;
    if !key.prc.supports_shortened() {
        return Err(HarnessError::Config(
            "edit detection needs an alignment-calibrated key (edits change lengths)".into(),
        ));
    }
    let detect_runs = (cfg.trials.runs as usize).min(50);
    let rates = detection_rates(
        cfg,
        &key,
        &model,
        detect_runs,
        budget_below,
        per_block_edits,
        block_len,
        delta,
        recoverable_error_bound,
    );
    report.metric("detection_rate_no_channel", rates.baseline, rate_ci_half(rates.baseline, detect_runs as u64));
    report.metric("detection_rate_budget_zero", rates.zero, rate_ci_half(rates.zero, detect_runs as u64));
    report.metric(
        "detection_rate_uniform_below_bound",
        rates.uniform_below,
        rate_ci_half(rates.uniform_below, detect_runs as u64),
    );
    report.metric(
        "detection_rate_targeting_below_bound",
        rates.targeting_below,
        rate_ci_half(rates.targeting_below, detect_runs as u64),
    );
    report.metric(
        "detection_rate_targeting_corrupt_all",
        rates.corrupt_all,
        rate_ci_half(rates.corrupt_all, detect_runs as u64),
    );
    report.metric("budget_below_bound_fraction", budget_below, 0.0);
    report.metric("mean_corrupt_all_fraction", rates.mean_corrupt_all_budget, 0.0);

    report.verdict_le(
        "budget_zero_equals_baseline",
        (rates.zero - rates.baseline).abs(),
        0.0,
    );
    report.verdict_ge(
        "detection_below_bound",
        rates.targeting_below,
        cfg.trials.detect_bound,
    );
    report.verdict_le("detection_corrupt_all", rates.corrupt_all, 0.5);
    Ok(report)
}

struct EditRates {
    baseline: f64,
    zero: f64,
    uniform_below: f64,
    targeting_below: f64,
    corrupt_all: f64,
    mean_corrupt_all_budget: f64,
}

#[allow(clippy::too_many_arguments)]
fn detection_rates(
    cfg: &ExperimentConfig,
    key: &tokmark_core::watermark::WatermarkKey,
    model: &tokmark_core::model::ModelSpec,
    runs: usize,
    budget_below: f64,
    per_block_edits: usize,
    block_len: usize,
    delta: f64,
    recoverable_error_bound: f64,
) -> EditRates {
    let outcomes: Vec<[f64; 6]> = map_indexed(ExecMode::default(), runs, |r| {
        let gen_seed = trial_seed(cfg.seed, 60, r as u64);
        let (tokens, tr) = wm_generate(key, model, "preset", gen_seed).unwrap();
        let stats = block_stats(&tr, key.params.num_blocks() as usize);
        let recoverable: Vec<usize> = stats
            .iter()
            .enumerate()
            .filter(|(_, b)| {
                b.steps as usize == block_len
                    && b.entropy_fraction() + 1e-12 >= delta / 4.0
                    && b.favorable_hash()
                    && b.error_rate() <= recoverable_error_bound
            })
            .map(|(i, _)| i)
            .collect();
        let corrupt_all_budget = (((recoverable.len() + 1) * per_block_edits) as f64
            / tokens.len() as f64)
            .min(0.99);
        let mut rng = tokmark_core::rng::derive_rng(cfg.seed, &[0xed, r as u64]);
        let detect = |toks: &Vec<tokmark_core::token::Token>| -> f64 {
            if toks.is_empty() {
                return 0.0;
            }
            f64::from(u8::from(
                wm_detect(key, toks, DetectMode::Fast).unwrap().detected,
            ))
        };
        let baseline = detect(&tokens);
        let zero = {
            let t = tokmark_core::channel::apply_edit_adversary(
                &tokens,
                0.0,
                &EditStrategy::UniformRandomEdits,
                key.params.vocab_size,
                &mut rng,
            )
            .unwrap();
            detect(&t)
        };
        let uniform_below = {
            let t = tokmark_core::channel::apply_edit_adversary(
                &tokens,
                budget_below,
                &EditStrategy::UniformRandomEdits,
                key.params.vocab_size,
                &mut rng,
            )
            .unwrap();
            detect(&t)
        };
        let targeting = EditStrategy::BlockTargeting {
            block_len,
            targets: recoverable.clone(),
            per_block: per_block_edits,
        };
        let targeting_below = {
            let t = tokmark_core::channel::apply_edit_adversary(
                &tokens,
                budget_below,
                &targeting,
                key.params.vocab_size,
                &mut rng,
            )
            .unwrap();
            detect(&t)
        };
        let corrupt_all = {
            let t = tokmark_core::channel::apply_edit_adversary(
                &tokens,
                corrupt_all_budget,
                &targeting,
                key.params.vocab_size,
                &mut rng,
            )
            .unwrap();
            detect(&t)
        };
        [
            baseline,
            zero,
            uniform_below,
            targeting_below,
            corrupt_all,
            corrupt_all_budget,
        ]
    });
    let mean = |i: usize| outcomes.iter().map(|o| o[i]).sum::<f64>() / runs as f64;
    EditRates {
        baseline: mean(0),
        zero: mean(1),
        uniform_below: mean(2),
        targeting_below: mean(3),
        corrupt_all: mean(4),
        mean_corrupt_all_budget: mean(5),
    }
}
