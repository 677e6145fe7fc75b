//! Property tests for the structural invariants.

use proptest::prelude::*;

use tokmark_core::bits::BitVec;
use tokmark_core::channel::{
    apply_deletion, apply_edit_adversary, apply_substitution, indel_distance, EditStrategy,
    SubstitutionMap,
};
use tokmark_core::dist::TokenDist;
use tokmark_core::model::{entropy_profile, StepRecord, Transcript};
use tokmark_core::prc::align::{llr_score, AlignModel};
use tokmark_core::rng::derive_rng;
use tokmark_core::token::Token;

fn arb_dist() -> impl Strategy<Value = TokenDist> {
    proptest::collection::vec(1u32..1000, 1..12).prop_map(|weights| {
        let total: u32 = weights.iter().sum();
        let support: Vec<(Token, f64)> = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (Token(i as u32), f64::from(w) / f64::from(total)))
            .collect();
        TokenDist::new(support).unwrap()
    })
}

proptest! {
    /// 2^(-empirical_entropy(D, t)) recovers the stored probability.
    #[test]
    fn entropy_identity(dist in arb_dist()) {
        for &(t, p) in dist.support() {
            let h = dist.empirical_entropy(t).unwrap();
            prop_assert!((2f64.powf(-h) - p).abs() <= 1e-9);
        }
    }

    /// Packed bit vectors agree with a plain bool-vector model.
    #[test]
    fn bitvec_matches_bool_model(bools in proptest::collection::vec(any::<bool>(), 1..200)) {
        let bv = BitVec::from_bools(&bools);
        prop_assert_eq!(bv.len(), bools.len());
        for (i, &b) in bools.iter().enumerate() {
            prop_assert_eq!(bv.get(i), b);
        }
        prop_assert_eq!(bv.count_ones(), bools.iter().filter(|&&b| b).count());
        let mut pushed = BitVec::zeros(0);
        for &b in &bools {
            pushed.push(b);
        }
        prop_assert_eq!(pushed, bv);
    }

    /// Substitution preserves length and touches ids only inside the vocab.
    #[test]
    fn substitution_contract(ids in proptest::collection::vec(0u32..6, 1..100),
                             p in 0.0f64..=1.0,
                             seed in any::<u64>()) {
        let tokens: Vec<Token> = ids.iter().map(|&i| Token(i)).collect();
        let map = SubstitutionMap::SynonymClusters { vocab_size: 6, cluster_size: 2 };
        let mut rng = derive_rng(seed, &[]);
        let out = apply_substitution(&tokens, &map, p, &mut rng).unwrap();
        prop_assert_eq!(out.len(), tokens.len());
        prop_assert!(out.iter().all(|t| t.id() < 6));
        // cluster replacement never leaves the cluster
        for (a, b) in tokens.iter().zip(&out) {
            prop_assert_eq!(a.id() / 2, b.id() / 2);
        }
    }

    /// Deletion output is a subsequence of the input.
    #[test]
    fn deletion_is_a_subsequence(ids in proptest::collection::vec(0u32..9, 1..120),
                                 p in 0.0f64..=1.0,
                                 seed in any::<u64>()) {
        let tokens: Vec<Token> = ids.iter().map(|&i| Token(i)).collect();
        let mut rng = derive_rng(seed, &[]);
        let out = apply_deletion(&tokens, p, &mut rng).unwrap();
        prop_assert_eq!(indel_distance(&tokens, &out), tokens.len() - out.len());
    }

    /// The edit adversary stays within its budget under both strategies.
    #[test]
    fn edit_adversary_respects_budget(ids in proptest::collection::vec(0u32..5, 4..150),
                                      budget in 0.0f64..=1.0,
                                      seed in any::<u64>()) {
        let tokens: Vec<Token> = ids.iter().map(|&i| Token(i)).collect();
        let allowed = (budget * tokens.len() as f64).floor() as usize;
        let mut rng = derive_rng(seed, &[]);
        for strategy in [
            EditStrategy::UniformRandomEdits,
            EditStrategy::BlockTargeting { block_len: 8, targets: vec![0, 2, 1], per_block: 3 },
        ] {
            let out = apply_edit_adversary(&tokens, budget, &strategy, 5, &mut rng).unwrap();
            prop_assert!(indel_distance(&tokens, &out) <= allowed);
        }
    }

    /// The banded forward score agrees with full enumeration at small sizes.
    #[test]
    fn alignment_llr_matches_enumeration(cw_bits in proptest::collection::vec(any::<bool>(), 6..12),
                                          w_bits in proptest::collection::vec(any::<bool>(), 1..5),
                                          err in 0.05f64..0.45,
                                          del in 0.1f64..0.7) {
        prop_assume!(w_bits.len() <= cw_bits.len());
        let c = BitVec::from_bools(&cw_bits);
        let w = BitVec::from_bools(&w_bits);
        let model = AlignModel { del_rate: del, err_rate: err };
        let fast = llr_score(&w, &c, &model);
        let slow = brute_llr(&w, &c, &model);
        prop_assert!((fast - slow).abs() < 1e-9, "fast {} slow {}", fast, slow);
    }

    /// The profile window always has the requested minimum length and its
    /// reported fraction is correct; no window of any length beats it.
    #[test]
    fn entropy_profile_is_optimal(bits in proptest::collection::vec(any::<bool>(), 5..60),
                                  window_len in 2usize..8) {
        prop_assume!(window_len <= bits.len());
        let tr = Transcript {
            steps: bits.iter().enumerate().map(|(i, &b)| StepRecord {
                position: i as u64,
                token: Token(0),
                entropy_bits: if b { 1.0 } else { 0.0 },
                block_index: None,
                pair: None,
                success: None,
                prc_bit: None,
                hash_bit: None,
            }).collect(),
        };
        let ((s, e), frac) = entropy_profile(&tr, window_len, 1.0).unwrap();
        prop_assert!(e - s >= window_len);
        let count = bits[s..e].iter().filter(|&&b| b).count();
        prop_assert!((frac - count as f64 / (e - s) as f64).abs() < 1e-12);
        // brute force over all windows of length >= window_len
        let mut best = 0.0f64;
        for i in 0..bits.len() {
            for j in (i + window_len)..=bits.len() {
                let c = bits[i..j].iter().filter(|&&b| b).count();
                best = best.max(c as f64 / (j - i) as f64);
            }
        }
        prop_assert!(frac >= best - 1e-9, "profile {} < brute {}", frac, best);
    }
}

fn brute_llr(window: &BitVec, codeword: &BitVec, model: &AlignModel) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        w: &BitVec,
        c: &BitVec,
        i: usize,
        j0: usize,
        last: Option<usize>,
        model: &AlignModel,
        acc: f64,
        total: &mut f64,
    ) {
        if i == w.len() {
            *total += acc;
            return;
        }
        for j in j0..=(c.len() - (w.len() - i)) {
            let e = if c.get(j) == w.get(i) {
                1.0 - model.err_rate
            } else {
                model.err_rate
            };
            let gap = match last {
                None => 1.0,
                Some(l) => (1.0 - model.del_rate) * model.del_rate.powi((j - l - 1) as i32),
            };
            rec(w, c, i + 1, j + 1, Some(j), model, acc * e * gap, total);
        }
    }
    let mut total = 0.0;
    rec(window, codeword, 0, 0, None, model, 1.0, &mut total);
    total.log2() + window.len() as f64
}
