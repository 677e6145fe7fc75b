//! Consistency of embedding errors.
//!
//! The zero-bit error indicator of position `i` is `h_i(t_i) != c_i`. A
//! binary-symmetric error pattern has one rate everywhere and no serial
//! structure, so each repetition runs a Bonferroni family of necessary
//! conditions: rate homogeneity over contiguous and residue-class position
//! bins, plus runs-test and lag-1 independence checks. Models that interleave
//! zero-entropy tokens (rate 1/2) with one-bit tokens (rate 3/8 under fresh
//! hashes) fail the residue-class tests.

use tokmark_core::exec::{map_indexed, ExecMode};
use tokmark_core::hash::hash_sample;
use tokmark_core::watermark::wm_generate_fresh_hash;

use crate::config::{ExperimentConfig, ResolvedStage};
use crate::report::ExperimentReport;
use crate::stats::{
    chi2_sf, family_accepts, lag1_autocorr_z, normal_two_sided_p, rate_ci_half, TestOutcome,
};
use crate::{HarnessError, Result};

const FAMILY_LEVEL: f64 = 0.01;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let model = cfg.model.build()?;
    let samples = cfg.trials.samples as usize;
    if samples < 100_000 {
        return Err(HarnessError::Config(
            "consistency needs at least 100000 indicators per repetition".into(),
        ));
    }
    if (model.max_len as usize) < samples + 1 {
        return Err(HarnessError::Config(
            "model max_len must exceed the indicator sample count".into(),
        ));
    }
    let stages = match &cfg.channel {
        None => Vec::new(),
        Some(ch) => {
            let stages = ch.resolve(model.vocab.size())?;
            for s in &stages {
                if !matches!(
                    s,
                    ResolvedStage::Core(tokmark_core::channel::ChannelStage::Sub { .. })
                ) {
                    return Err(HarnessError::Config(
                        "consistency channels must preserve positions (substitution only)"
                            .into(),
                    ));
                }
            }
            stages
        }
    };

    let reps = cfg.trials.repetitions as usize;
    let outcomes: Vec<(bool, f64, f64)> = map_indexed(ExecMode::default(), reps, |rep| {
        let seed = super::trial_seed(cfg.seed, 40, rep as u64);
        let (tokens, tr, hash_master) =
            wm_generate_fresh_hash(&model, "preset", seed).expect("generation succeeds");
        let attacked = apply_sub_only(&stages, &tokens, seed ^ 0x7777);
        let indicators: Vec<bool> = (0..samples)
            .map(|pos| {
                let h = hash_sample(hash_master, pos as u32);
                h.eval(attacked[pos]) != tr.steps[pos].prc_bit.unwrap()
            })
            .collect();
        let tests = indicator_tests(&indicators);
        let even_rate = class_rate(&indicators, 2, 0);
        let odd_rate = class_rate(&indicators, 2, 1);
        (family_accepts(&tests, FAMILY_LEVEL), even_rate, odd_rate)
    });

    let accepts = outcomes.iter().filter(|(a, _, _)| *a).count();
    let accept_rate = accepts as f64 / reps as f64;
    let mean_even = outcomes.iter().map(|(_, e, _)| e).sum::<f64>() / reps as f64;
    let mean_odd = outcomes.iter().map(|(_, _, o)| o).sum::<f64>() / reps as f64;

    let mut report = ExperimentReport::new(cfg);
    report.metric("accept_rate", accept_rate, rate_ci_half(accept_rate, reps as u64));
    report.metric("mean_error_rate_even_positions", mean_even, 0.0);
    report.metric("mean_error_rate_odd_positions", mean_odd, 0.0);
    report.metric("family_level", FAMILY_LEVEL, 0.0);
    if cfg.trials.expect_accept {
        report.verdict_ge("consistency_accept_rate", accept_rate, 0.95);
    } else {
        report.verdict_le("consistency_reject_rate_complement", accept_rate, 0.05);
    }
    Ok(report)
}

fn apply_sub_only(
    stages: &[ResolvedStage],
    tokens: &[tokmark_core::token::Token],
    seed: u64,
) -> Vec<tokmark_core::token::Token> {
    let mut cur = tokens.to_vec();
    for (idx, stage) in stages.iter().enumerate() {
        if let ResolvedStage::Core(tokmark_core::channel::ChannelStage::Sub { map, p }) = stage {
            let mut rng = tokmark_core::rng::derive_rng(seed, &[idx as u64]);
            cur = tokmark_core::channel::apply_substitution(&cur, map, *p, &mut rng).unwrap();
        }
    }
    cur
}

/// The Bonferroni family: rate homogeneity across contiguous bins and
/// residue classes mod 2, 3, 4, plus two serial-independence tests.
pub fn indicator_tests(indicators: &[bool]) -> Vec<TestOutcome> {
    let mut tests = Vec::with_capacity(6);
    tests.push(TestOutcome {
        name: "homogeneity_contiguous".into(),
        p_value: homogeneity_p(indicators, |i| i * 20 / indicators.len(), 20),
    });
    for modulus in [2usize, 3, 4] {
        tests.push(TestOutcome {
            name: format!("homogeneity_mod_{modulus}"),
            p_value: homogeneity_p(indicators, move |i| i % modulus, modulus),
        });
    }
    tests.push(TestOutcome {
        name: "independence_runs".into(),
        p_value: normal_two_sided_p(tokmark_core_runs(indicators)),
    });
    tests.push(TestOutcome {
        name: "independence_lag1".into(),
        p_value: normal_two_sided_p(lag1_autocorr_z(indicators)),
    });
    tests
}

fn tokmark_core_runs(bits: &[bool]) -> f64 {
    crate::stats::runs_test_z(bits)
}

/// 2 x B contingency chi-square of error counts across position bins.
fn homogeneity_p(indicators: &[bool], bin: impl Fn(usize) -> usize, bins: usize) -> f64 {
    let mut errs = vec![0u64; bins];
    let mut totals = vec![0u64; bins];
    for (i, &e) in indicators.iter().enumerate() {
        let b = bin(i).min(bins - 1);
        totals[b] += 1;
        if e {
            errs[b] += 1;
        }
    }
    let n: u64 = totals.iter().sum();
    let total_err: u64 = errs.iter().sum();
    if total_err == 0 || total_err == n {
        return 1.0;
    }
    let rate = total_err as f64 / n as f64;
    let mut stat = 0.0;
    let mut df = 0usize;
    for (&e, &t) in errs.iter().zip(&totals) {
        if t == 0 {
            continue;
        }
        let exp_e = rate * t as f64;
        let exp_o = (1.0 - rate) * t as f64;
        stat += (e as f64 - exp_e).powi(2) / exp_e;
        stat += ((t - e) as f64 - exp_o).powi(2) / exp_o;
        df += 1;
    }
    chi2_sf(stat, (df.max(2) - 1) as f64)
}

fn class_rate(indicators: &[bool], modulus: usize, class: usize) -> f64 {
    let (mut err, mut tot) = (0u64, 0u64);
    for (i, &e) in indicators.iter().enumerate() {
        if i % modulus == class {
            tot += 1;
            if e {
                err += 1;
            }
        }
    }
    err as f64 / tot.max(1) as f64
}
