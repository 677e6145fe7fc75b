//! Code-layer properties: round trips, calibrated soundness, channel
//! robustness, threshold cross-checks against closed forms, and the
//! brute-force nearest-codeword equivalence at small block length.

use rand::Rng;
use tokmark_core::bits::BitVec;
use tokmark_core::prc::{
    bit_channel, calibrate_threshold, measure_null_fpr, prc_decode, prc_encode, prc_gen,
    AlignModel, BitChannel, PrcKey, PrcParams, PrcVariant,
};
use tokmark_core::rng::derive_rng;

fn oracle_params(code_len: u32, num_codewords: u32, alpha: f64) -> PrcParams {
    PrcParams {
        n: 8,
        code_len,
        alpha,
        variant: PrcVariant::Oracle {
            num_codewords,
            align: None,
        },
    }
}

#[test]
fn round_trip_all_variants() {
    let mut rng = derive_rng(1, &[]);
    for seed in 0..20 {
        let key = prc_gen(&oracle_params(256, 4, 1e-3), seed).unwrap();
        for _ in 0..5 {
            let c = prc_encode(&key, &mut rng);
            assert!(prc_decode(&key, &c.0).unwrap().is_some());
        }
        let ldpc = prc_gen(
            &PrcParams {
                n: 8,
                code_len: 256,
                alpha: 1e-3,
                variant: PrcVariant::Ldpc {
                    row_weight: 3,
                    num_rows: 128,
                },
            },
            seed,
        )
        .unwrap();
        for _ in 0..5 {
            let c = prc_encode(&ldpc, &mut rng);
            assert!(prc_decode(&ldpc, &c.0).unwrap().is_some());
        }
    }
}

#[test]
fn null_rate_stays_under_alpha_after_calibration() {
    let mut key = prc_gen(&oracle_params(256, 4, 1e-3), 7).unwrap();
    calibrate_threshold(&mut key, 1e-3, 10_000, 21).unwrap();
    let (rate, trials) = measure_null_fpr(&key, 10_000, 0xc0ffee);
    assert!(trials >= 10_000);
    assert!(rate <= 1e-3, "null rate {rate}");
}

#[test]
fn bsc_quarter_noise_is_reliably_decoded() {
    // agreement concentrates at 0.75 l, far above a 0.6 l threshold
    let mut key = prc_gen(&oracle_params(4096, 1, 1e-3), 3).unwrap();
    if let PrcKey::Oracle(k) = &mut key {
        k.tau_sub = (0.6 * 4096.0) as usize;
    }
    let mut rng = derive_rng(4, &[]);
    let trials = 1000;
    let mut hits = 0;
    for _ in 0..trials {
        let c = prc_encode(&key, &mut rng);
        let noisy = bit_channel(&c.0, &BitChannel::Bsc { p: 0.25 }, None, &mut rng).unwrap();
        if prc_decode(&key, &noisy).unwrap().is_some() {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate >= 0.99, "detection rate {rate}");
}

#[test]
fn calibrated_threshold_tracks_hoeffding_form() {
    let mut key = prc_gen(&oracle_params(4096, 1, 1e-2), 5).unwrap();
    let report = calibrate_threshold(&mut key, 1e-3, 100_000, 17).unwrap();
    let tau = report.tau_sub.unwrap();
    let hoeffding = 4096.0 / 2.0 + (4096.0 * (1000.0f64).ln() / 2.0).sqrt();
    let rel = (tau - hoeffding).abs() / hoeffding;
    assert!(rel < 0.10, "tau {tau} vs hoeffding {hoeffding}");
    assert!(report.info.achieved_fpr <= 1e-3);
}

#[test]
fn adv_flip_boundary_both_sides() {
    // explicit threshold at 0.59 l: a 0.40 budget leaves agreement 0.60 l
    // (detected), a 0.45 budget leaves 0.55 l (not detected)
    let mut key = prc_gen(&oracle_params(1024, 1, 1e-3), 6).unwrap();
    if let PrcKey::Oracle(k) = &mut key {
        k.tau_sub = (0.59 * 1024.0) as usize;
    }
    let mut rng = derive_rng(7, &[]);
    let c = prc_encode(&key, &mut rng);
    let hit = bit_channel(
        &c.0,
        &BitChannel::AdvFlip { budget: 0.40 },
        Some(&c.0),
        &mut rng,
    )
    .unwrap();
    assert_eq!(c.0.agreement(&hit), 1024 - 409);
    assert!(prc_decode(&key, &hit).unwrap().is_some());
    let miss = bit_channel(
        &c.0,
        &BitChannel::AdvFlip { budget: 0.45 },
        Some(&c.0),
        &mut rng,
    )
    .unwrap();
    assert!(prc_decode(&key, &miss).unwrap().is_none());
}

#[test]
fn ldpc_satisfied_fraction_matches_the_weight_bias() {
    // a weight-t check survives BSC(p) with probability (1 + (1-2p)^t) / 2
    let key = prc_gen(
        &PrcParams {
            n: 8,
            code_len: 4096,
            alpha: 1e-3,
            variant: PrcVariant::Ldpc {
                row_weight: 3,
                num_rows: 2048,
            },
        },
        8,
    )
    .unwrap();
    let PrcKey::Ldpc(ldpc) = &key else {
        unreachable!()
    };
    let mut rng = derive_rng(9, &[]);
    let trials = 200;
    for &p in &[0.05f64, 0.1, 0.2] {
        let expect = 0.5 + 0.5 * (1.0 - 2.0 * p).powi(3);
        let mut fracs = Vec::with_capacity(trials);
        for _ in 0..trials {
            let c = prc_encode(&key, &mut rng);
            let noisy = bit_channel(&c.0, &BitChannel::Bsc { p }, None, &mut rng).unwrap();
            fracs.push(ldpc.satisfied_count(&noisy) as f64 / 2048.0);
        }
        let mean = fracs.iter().sum::<f64>() / trials as f64;
        let var = fracs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() <= 3.0 * se.max(1e-4),
            "p={p}: mean {mean} expected {expect} se {se}"
        );
    }
}

#[test]
fn detection_rate_is_monotone_in_substitution_rate() {
    let mut key = prc_gen(&oracle_params(1024, 1, 1e-3), 10).unwrap();
    calibrate_threshold(&mut key, 1e-3, 10_000, 11).unwrap();
    let mut rng = derive_rng(12, &[]);
    let trials = 1000;
    let mut rates = Vec::new();
    for &p in &[0.05, 0.2, 0.35, 0.45, 0.5] {
        let mut hits = 0;
        for _ in 0..trials {
            let c = prc_encode(&key, &mut rng);
            let noisy = bit_channel(&c.0, &BitChannel::Bsc { p }, None, &mut rng).unwrap();
            if prc_decode(&key, &noisy).unwrap().is_some() {
                hits += 1;
            }
        }
        rates.push(hits as f64 / trials as f64);
    }
    for w in rates.windows(2) {
        // slack covers binomial noise at 1000 trials
        assert!(w[1] <= w[0] + 0.04, "rates not monotone: {rates:?}");
    }
    assert!(rates[0] > 0.99 && rates[4] < 0.05, "rates {rates:?}");
}

#[test]
fn detection_rate_is_monotone_in_deletion_rate() {
    let params = PrcParams {
        n: 8,
        code_len: 512,
        alpha: 1e-2,
        variant: PrcVariant::Oracle {
            num_codewords: 1,
            align: Some(AlignModel {
                del_rate: 0.3,
                err_rate: 0.2,
            }),
        },
    };
    let mut key = prc_gen(&params, 13).unwrap();
    calibrate_threshold(&mut key, 1e-2, 5_000, 14).unwrap();
    let mut rng = derive_rng(15, &[]);
    let trials = 400;
    let mut rates = Vec::new();
    for &p in &[0.0, 0.15, 0.3, 0.45, 0.65] {
        let mut hits = 0;
        for _ in 0..trials {
            let c = prc_encode(&key, &mut rng);
            let short = bit_channel(&c.0, &BitChannel::Delete { p }, None, &mut rng).unwrap();
            if !short.is_empty() && prc_decode(&key, &short).unwrap().is_some() {
                hits += 1;
            }
        }
        rates.push(hits as f64 / trials as f64);
    }
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.07, "rates not monotone: {rates:?}");
    }
    assert!(rates[0] == 1.0, "zero deletion must round-trip: {rates:?}");
    assert!(rates[4] < 0.05, "out-of-range windows must not decode: {rates:?}");
}

/// Exhaustive boundary check at l=64 against an independent nearest-codeword
/// computation (per-bit loop, no shared kernels with the implementation).
#[test]
fn small_block_decode_equals_brute_force_nearest_codeword() {
    let alpha = 1e-2;
    let key = prc_gen(&oracle_params(64, 2, alpha), 16).unwrap();
    let PrcKey::Oracle(k) = &key else {
        unreachable!()
    };
    let tau = k.tau_sub;
    let radius = 64 - tau; // detect iff min distance <= radius

    // the stated robustness hypothesis: inputs within (1/2 - eps) l of a
    // codeword with eps*l >= 2 sqrt(l ln(1/alpha) / 2) must decode
    let eps_l = 2.0 * (64.0 * (1.0 / alpha).ln() / 2.0).sqrt();
    let guaranteed = (0.5 * 64.0 - eps_l).floor();
    assert!(
        guaranteed <= radius as f64,
        "threshold too tight: radius {radius}, guaranteed {guaranteed}"
    );

    let brute_min_dist = |bits: &BitVec| -> usize {
        k.codewords
            .iter()
            .map(|cw| (0..64).filter(|&i| cw.get(i) != bits.get(i)).count())
            .min()
            .unwrap()
    };

    let mut rng = derive_rng(17, &[]);
    for cw in &k.codewords {
        for d in 0..=64usize {
            for pattern in 0..40 {
                let mut bits = cw.clone();
                if pattern == 0 {
                    for i in 0..d {
                        bits.flip(i);
                    }
                } else {
                    // random d-subset
                    let mut idx: Vec<usize> = (0..64).collect();
                    for i in 0..d {
                        let j = i + rng.random_range(0..64 - i);
                        idx.swap(i, j);
                    }
                    for &i in &idx[..d] {
                        bits.flip(i);
                    }
                }
                let detected = prc_decode(&key, &bits).unwrap().is_some();
                let min_dist = brute_min_dist(&bits);
                assert_eq!(
                    detected,
                    min_dist <= radius,
                    "d={d} pattern={pattern} min_dist={min_dist} radius={radius}"
                );
            }
        }
    }
}

/// The alignment decoder works per-window in its feasible regime (light bit
/// noise under substantial deletion). Heavier noise drops per-window power
/// and detection then rides on the many-blocks redundancy, which the
/// harness-level experiments measure.
#[test]
fn alignment_decode_succeeds_at_moderate_deletion() {
    let params = PrcParams {
        n: 8,
        code_len: 512,
        alpha: 1e-2,
        variant: PrcVariant::Oracle {
            num_codewords: 1,
            align: Some(AlignModel {
                del_rate: 0.3,
                err_rate: 0.1,
            }),
        },
    };
    let mut key = prc_gen(&params, 18).unwrap();
    calibrate_threshold(&mut key, 1e-2, 5_000, 19).unwrap();
    let mut rng = derive_rng(20, &[]);
    let trials = 200;
    let mut hits = 0;
    for _ in 0..trials {
        let c = prc_encode(&key, &mut rng);
        let noisy = bit_channel(&c.0, &BitChannel::Bsc { p: 0.1 }, None, &mut rng).unwrap();
        let short = bit_channel(&noisy, &BitChannel::Delete { p: 0.3 }, None, &mut rng).unwrap();
        if prc_decode(&key, &short).unwrap().is_some() {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate >= 0.9, "detection rate {rate}");
}
