//! Scratch diagnostic for deletion-mode detection power. Not part of the
//! deliverable surface; run with `cargo run --release --example diag_del`.

use tokmark_core::bits::BitVec;
use tokmark_core::prc::align::llr_score;
use tokmark_core::prc::{calibrate_threshold, PrcKey};
use tokmark_core::rng::derive_rng;
use tokmark_core::watermark::{wm_detect, wm_generate, DetectMode};
use tokmark_harness::config::ResolvedStage;
use tokmark_harness::experiments::{apply_resolved_stages, block_stats};
use tokmark_harness::presets::preset;

fn main() {
    let cfg = preset("robustness-sub-del-feasible").unwrap();
    let model = cfg.model.build().unwrap();
    let key_cfg = cfg.key.as_ref().unwrap();
    let mut key = key_cfg.build(&cfg.model, cfg.seed ^ 0x0b57).unwrap();
    // re-run calibration to print the threshold
    let rep = calibrate_threshold(&mut key.prc, key_cfg.alpha, 10_000, (cfg.seed ^ 0x0b57) ^ 0xca11_b8)
        .unwrap();
    println!("tau_align = {:?}", rep.tau_align);
    let PrcKey::Oracle(k) = &key.prc else { unreachable!() };
    let align = k.align.as_ref().unwrap();
    println!("len_range {:?}, cal lengths {:?}", align.len_range, align.calibration_lengths());

    // per-length null quantiles under the current scoring
    let mut rng = derive_rng(33, &[]);
    for &len in &align.calibration_lengths() {
        let mut scores: Vec<f64> = (0..3000)
            .map(|_| {
                let w = BitVec::random(&mut rng, len);
                llr_score(&w, &k.codewords[0], &align.model)
            })
            .collect();
        scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        println!(
            "null len {len}: mean {:7.2} q99 {:7.2} q999 {:7.2}",
            scores.iter().sum::<f64>() / scores.len() as f64,
            scores[30],
            scores[3]
        );
    }

    let stages = cfg.channel.as_ref().unwrap().resolve(model.vocab.size()).unwrap();
    let block_len = key.params.block_len as usize;
    let wl = (0.8 * (1.0 - align.model.del_rate) * block_len as f64).round() as usize;
    let num_hashes = key.hash_seeds.len();

    let mut det = 0;
    let runs = 100;
    for r in 0..runs {
        let gen_seed = tokmark_harness::experiments::trial_seed(cfg.seed, 20, r);
        let ch_seed = tokmark_harness::experiments::trial_seed(cfg.seed, 21, r);
        let (tokens, tr) = wm_generate(&key, &model, "preset", gen_seed).unwrap();
        let attacked = apply_resolved_stages(&stages, &tokens, &key, ch_seed).unwrap();
        let report = wm_detect(&key, &attacked, DetectMode::Fast).unwrap();
        if report.detected {
            det += 1;
        }
        if r == 0 {
            let stats = block_stats(&tr, num_hashes);
            println!("run 0: len {} detected {}", attacked.len(), report.detected);
            // per-block: favorable? window LLR at the estimated start
            let len = attacked.len();
            for j in 0..num_hashes {
                let start = j * len / num_hashes;
                let end = (start + wl).min(len);
                let bits = BitVec::from_bools(
                    &attacked[start..end]
                        .iter()
                        .map(|&t| key.hash_seeds[j].eval(t))
                        .collect::<Vec<_>>(),
                );
                let s = llr_score(&bits, &k.codewords[0], &align.model);
                println!(
                    "  block {j:2} fav={} err={:.3} window[{start}..{end}] llr {:7.2}",
                    stats[j].favorable_hash(),
                    stats[j].error_rate(),
                    s
                );
            }
        }
    }
    println!("detection {}/{runs}", det);
}
